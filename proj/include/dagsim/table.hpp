#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dagsim {

enum class ColumnType { Boolean, Integer, Real, Categorical };

std::string_view to_string(ColumnType type);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// One typed column. Values of every type are held as doubles so that the
/// expression evaluator can read any column without conversion: booleans are
/// 0/1, integers are exact up to 2^53, categorical values are 0-based level
/// codes. NaN is the missing marker.
class Column {
public:
    Column() = default;
    Column(ColumnType type, std::vector<double> values, std::vector<std::string> levels = {});

    static Column booleans(std::size_t n, bool value = false);
    static Column integers(std::size_t n, double value = 0.0);
    static Column reals(std::size_t n, double value = 0.0);

    ColumnType type() const { return type_; }
    void set_type(ColumnType type) { type_ = type; }
    std::size_t size() const { return values_.size(); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    const std::vector<std::string>& levels() const { return levels_; }
    void set_levels(std::vector<std::string> levels) { levels_ = std::move(levels); }

    bool has_missing() const;

    /// Text form of row `i` used by the CSV writer and lookup keys: booleans
    /// as true/false, integers without a fraction, reals with 17 significant
    /// digits, categorical values as their label (or code when unlabelled),
    /// and missing as the empty string.
    std::string format(std::size_t i) const;

    friend bool operator==(const Column& a, const Column& b);

private:
    ColumnType type_ = ColumnType::Real;
    std::vector<double> values_;
    std::vector<std::string> levels_;
};

/// Columnar dataset: ordered, uniquely named columns of equal length.
class DataTable {
public:
    DataTable() = default;
    explicit DataTable(std::size_t n_rows) : n_rows_(n_rows) {}

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }

    bool contains(std::string_view name) const { return find(name) != npos; }
    std::size_t find(std::string_view name) const;

    /// Throws UnknownColumn.
    const Column& column(std::string_view name) const;
    Column& column(std::string_view name);
    const Column& column(std::size_t index) const { return columns_[index]; }
    Column& column(std::size_t index) { return columns_[index]; }
    const std::string& name(std::size_t index) const { return names_[index]; }
    const std::vector<std::string>& names() const { return names_; }

    /// Appends a new column, or replaces the column of the same name in place.
    /// Throws ValidationError when the length does not match n_rows().
    void set(const std::string& name, Column column);
    void remove(std::string_view name);

    friend bool operator==(const DataTable& a, const DataTable& b);

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::size_t n_rows_ = 0;
    std::vector<std::string> names_;
    std::vector<Column> columns_;
};

/// Shortest decimal text that round-trips `v` ("0", "0.5", "2.4").
std::string format_number(double v);

}  // namespace dagsim
