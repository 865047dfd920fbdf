#include "dagsim/table.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "dagsim/error.hpp"

namespace dagsim {

std::string_view to_string(ColumnType type) {
    switch (type) {
        case ColumnType::Boolean: return "boolean";
        case ColumnType::Integer: return "integer";
        case ColumnType::Real: return "real";
        case ColumnType::Categorical: return "categorical";
    }
    return "real";
}

Column::Column(ColumnType type, std::vector<double> values, std::vector<std::string> levels)
    : type_(type), values_(std::move(values)), levels_(std::move(levels)) {}

Column Column::booleans(std::size_t n, bool value) {
    return Column(ColumnType::Boolean, std::vector<double>(n, value ? 1.0 : 0.0));
}

Column Column::integers(std::size_t n, double value) {
    return Column(ColumnType::Integer, std::vector<double>(n, value));
}

Column Column::reals(std::size_t n, double value) {
    return Column(ColumnType::Real, std::vector<double>(n, value));
}

bool Column::has_missing() const {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return is_missing(v); });
}

std::string Column::format(std::size_t i) const {
    const double v = values_[i];
    if (is_missing(v)) return {};
    switch (type_) {
        case ColumnType::Boolean:
            return v != 0.0 ? "true" : "false";
        case ColumnType::Integer: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.0f", v);
            return buf;
        }
        case ColumnType::Categorical: {
            const auto code = static_cast<std::size_t>(v);
            if (!levels_.empty() && code < levels_.size()) return levels_[code];
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.0f", v);
            return buf;
        }
        case ColumnType::Real: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }
    }
    return {};
}

bool operator==(const Column& a, const Column& b) {
    if (a.type_ != b.type_ || a.levels_ != b.levels_ || a.values_.size() != b.values_.size())
        return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const double x = a.values_[i];
        const double y = b.values_[i];
        if (is_missing(x) != is_missing(y)) return false;
        if (!is_missing(x) && x != y) return false;
    }
    return true;
}

std::size_t DataTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return npos;
}

const Column& DataTable::column(std::string_view name) const {
    const auto i = find(name);
    if (i == npos) fail(ErrorCode::UnknownColumn, "no column named '" + std::string(name) + "'");
    return columns_[i];
}

Column& DataTable::column(std::string_view name) {
    const auto i = find(name);
    if (i == npos) fail(ErrorCode::UnknownColumn, "no column named '" + std::string(name) + "'");
    return columns_[i];
}

void DataTable::set(const std::string& name, Column column) {
    if (column.size() != n_rows_)
        fail(ErrorCode::ValidationError, "column '" + name + "' has " + std::to_string(column.size()) +
                                             " rows, table has " + std::to_string(n_rows_));
    const auto i = find(name);
    if (i == npos) {
        names_.push_back(name);
        columns_.push_back(std::move(column));
    } else {
        columns_[i] = std::move(column);
    }
}

void DataTable::remove(std::string_view name) {
    const auto i = find(name);
    if (i == npos) return;
    names_.erase(names_.begin() + static_cast<std::ptrdiff_t>(i));
    columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(i));
}

bool operator==(const DataTable& a, const DataTable& b) {
    return a.n_rows_ == b.n_rows_ && a.names_ == b.names_ && a.columns_ == b.columns_;
}

std::string format_number(double v) {
    if (is_missing(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace dagsim
