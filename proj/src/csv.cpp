#include "dagsim/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dagsim/error.hpp"

namespace dagsim {

namespace {

void put_field(std::string& line, const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        line += field;
        return;
    }
    line += '"';
    for (char c : field) {
        if (c == '"') line += '"';
        line += c;
    }
    line += '"';
}

/// Splits one record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_no;
            fields.push_back(std::move(field));
            return true;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) fail(ErrorCode::ParseError, "unterminated quote near line " + std::to_string(line_no));
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

bool parse_double(const std::string& s, double& out) {
    if (s == "inf" || s == "Inf") return out = std::numeric_limits<double>::infinity(), true;
    if (s == "-inf" || s == "-Inf") return out = -std::numeric_limits<double>::infinity(), true;
    const char* b = s.data();
    const char* e = b + s.size();
    if (b != e && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

bool integral_literal(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Column parse_column(const std::string& name, const std::vector<std::string>& cells, const Column* like) {
    std::vector<double> v(cells.size(), kMissing);
    auto bad = [&](std::size_t row) {
        fail(ErrorCode::ParseError, "column '" + name + "', data row " + std::to_string(row + 1) + ": cannot read '" +
                                        cells[row] + "'");
    };
    ColumnType type;
    std::vector<std::string> levels;
    if (like) {
        type = like->type();
        levels = like->levels();
    } else {
        bool all_bool = true, all_int = true, all_num = true;
        for (const auto& c : cells) {
            if (c.empty()) continue;
            double x;
            all_bool &= c == "true" || c == "false";
            all_int &= integral_literal(c);
            all_num &= parse_double(c, x);
        }
        type = all_bool ? ColumnType::Boolean
               : all_int ? ColumnType::Integer
               : all_num ? ColumnType::Real
                         : ColumnType::Categorical;
        if (type == ColumnType::Categorical)
            for (const auto& c : cells)
                if (!c.empty() && std::find(levels.begin(), levels.end(), c) == levels.end()) levels.push_back(c);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (c.empty()) continue;
        if (type == ColumnType::Boolean) {
            if (c == "true") v[i] = 1.0;
            else if (c == "false") v[i] = 0.0;
            else bad(i);
        } else if (type == ColumnType::Categorical && !levels.empty()) {
            auto it = std::find(levels.begin(), levels.end(), c);
            if (it == levels.end()) bad(i);
            v[i] = static_cast<double>(it - levels.begin());
        } else if (!parse_double(c, v[i])) {
            bad(i);
        }
    }
    return Column(type, std::move(v), std::move(levels));
}

}  // namespace

void write_csv(std::ostream& out, const DataTable& table) {
    std::string line;
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        if (c) line += ',';
        put_field(line, table.name(c));
    }
    line += '\n';
    out << line;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        line.clear();
        for (std::size_t c = 0; c < table.n_cols(); ++c) {
            if (c) line += ',';
            put_field(line, table.column(c).format(r));
        }
        line += '\n';
        out << line;
    }
}

std::string to_csv(const DataTable& table) {
    std::ostringstream out;
    write_csv(out, table);
    return out.str();
}

void write_csv_file(const std::string& path, const DataTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOError, "cannot open '" + path + "' for writing");
    write_csv(out, table);
    out.flush();
    if (!out) fail(ErrorCode::IOError, "failed writing '" + path + "'");
}

DataTable read_csv(std::istream& in, const DataTable* schema) {
    std::vector<std::string> header;
    std::size_t line_no = 1;
    if (!read_record(in, header, line_no)) fail(ErrorCode::ParseError, "empty CSV input");
    std::vector<std::vector<std::string>> cells(header.size());
    std::vector<std::string> fields;
    std::size_t rows = 0;
    while (read_record(in, fields, line_no)) {
        if (fields.size() != header.size())
            fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                            " fields, expected " + std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) cells[c].push_back(std::move(fields[c]));
        ++rows;
    }
    DataTable table(rows);
    for (std::size_t c = 0; c < header.size(); ++c) {
        const Column* like = schema && schema->contains(header[c]) ? &schema->column(header[c]) : nullptr;
        table.set(header[c], parse_column(header[c], cells[c], like));
    }
    return table;
}

DataTable parse_csv(const std::string& text, const DataTable* schema) {
    std::istringstream in(text);
    return read_csv(in, schema);
}

}  // namespace dagsim
