#pragma once

#include <iosfwd>
#include <string>

#include "dagsim/table.hpp"

namespace dagsim {

/// Comma separated, "\n" line ends, header always. Missing values are empty
/// fields; fields containing a comma, quote or newline are quoted.
void write_csv(std::ostream& out, const DataTable& table);
std::string to_csv(const DataTable& table);
/// Throws IOError.
void write_csv_file(const std::string& path, const DataTable& table);

/// Parses CSV text. Column types come from `schema` when it has a column of
/// the same name; otherwise they are inferred (true/false -> boolean,
/// integral literals -> integer, other numbers -> real, anything else ->
/// categorical with levels in order of appearance). Throws ParseError.
DataTable read_csv(std::istream& in, const DataTable* schema = nullptr);
DataTable parse_csv(const std::string& text, const DataTable* schema = nullptr);

}  // namespace dagsim
