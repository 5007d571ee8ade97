#pragma once

// Minimal comma-separated reader: UTF-8, header row required, lines
// starting with '#' ignored, fields may be double-quoted ("" escapes a
// quote). Positions are kept for error reporting.

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netharm::csv {

struct Field {
  std::string text;
  std::size_t column = 1;  // 1-based character column where the field starts
};

struct Row {
  std::size_t line = 0;
  std::vector<Field> fields;
};

struct Table {
  std::string source;
  Row header;
  std::vector<Row> rows;

  // Index of a named header column, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Throws ParseError on unterminated quotes or a missing header.
Table parse(std::istream& in, const std::string& source);
Table read_file(const std::string& path);

// Throws ParseError unless the header starts with `required` (in order),
// optionally followed by columns from `optional`.
void expect_header(const Table& table, const std::vector<std::string>& required,
                   const std::vector<std::string>& optional = {});

// Field accessors with line/column precise errors.
const Field& field(const Table& table, const Row& row, std::size_t index);
double parse_real(const Table& table, const Row& row, std::size_t index);
long long parse_integer(const Table& table, const Row& row, std::size_t index);
bool parse_bool(const Table& table, const Row& row, std::size_t index);

// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view text);

}  // namespace netharm::csv
