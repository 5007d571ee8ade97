#include "netharm/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "netharm/errors.hpp"

namespace netharm::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<Field> split(const std::string& line, std::size_t line_no, const std::string& source) {
  std::vector<Field> fields;
  std::size_t i = 0;
  while (true) {
    Field f;
    f.column = i + 1;
    // Skip leading blanks before a possible opening quote.
    std::size_t j = i;
    while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
    if (j < line.size() && line[j] == '"') {
      f.column = j + 1;
      ++j;
      bool closed = false;
      while (j < line.size()) {
        if (line[j] == '"') {
          if (j + 1 < line.size() && line[j + 1] == '"') {
            f.text.push_back('"');
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        f.text.push_back(line[j++]);
      }
      if (!closed) throw ParseError(source, line_no, f.column, "unterminated quoted field");
      while (j < line.size() && line[j] != ',') {
        if (line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
          throw ParseError(source, line_no, j + 1, "unexpected character after quoted field");
        }
        ++j;
      }
      i = j;
    } else {
      const auto end = line.find(',', i);
      const auto stop = end == std::string::npos ? line.size() : end;
      f.text = std::string(trim(std::string_view(line).substr(i, stop - i)));
      i = stop;
    }
    fields.push_back(std::move(f));
    if (i >= line.size()) break;
    ++i;  // past the comma
  }
  return fields;
}

bool blank_or_comment(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

[[noreturn]] void fail(const Table& table, const Row& row, std::size_t index, const std::string& reason) {
  const std::size_t column = index < row.fields.size() ? row.fields[index].column : 1;
  throw ParseError(table.source, row.line, column, reason);
}

std::string column_name(const Table& table, std::size_t index) {
  return index < table.header.fields.size() ? table.header.fields[index].text : std::to_string(index + 1);
}

}  // namespace

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    if (header.fields[i].text == name) return i;
  }
  return std::nullopt;
}

Table parse(std::istream& in, const std::string& source) {
  Table table;
  table.source = source;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (blank_or_comment(line)) continue;
    Row row{line_no, split(line, line_no, source)};
    if (!have_header) {
      table.header = std::move(row);
      have_header = true;
    } else {
      table.rows.push_back(std::move(row));
    }
  }
  if (!have_header) throw ParseError(source, std::max<std::size_t>(line_no, 1), 1, "missing header row");
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  return parse(in, path);
}

void expect_header(const Table& table, const std::vector<std::string>& required,
                   const std::vector<std::string>& optional) {
  const auto& fields = table.header.fields;
  for (std::size_t i = 0; i < required.size(); ++i) {
    if (i >= fields.size() || fields[i].text != required[i]) {
      const std::size_t column = i < fields.size() ? fields[i].column : 1;
      throw ParseError(table.source, table.header.line, column,
                       "expected header column '" + required[i] + "'");
    }
  }
  for (std::size_t i = required.size(); i < fields.size(); ++i) {
    const auto extra = i - required.size();
    if (extra >= optional.size() || fields[i].text != optional[extra]) {
      throw ParseError(table.source, table.header.line, fields[i].column,
                       "unexpected header column '" + fields[i].text + "'");
    }
  }
  for (const auto& row : table.rows) {
    if (row.fields.size() < required.size() || row.fields.size() > fields.size()) {
      const std::size_t column = row.fields.empty() ? 1 : row.fields.back().column;
      throw ParseError(table.source, row.line, column,
                       "expected " + std::to_string(required.size()) +
                           (fields.size() > required.size() ? "-" + std::to_string(fields.size()) : "") +
                           " fields, found " + std::to_string(row.fields.size()));
    }
  }
}

const Field& field(const Table& table, const Row& row, std::size_t index) {
  if (index >= row.fields.size()) fail(table, row, row.fields.size(), "missing field '" + column_name(table, index) + "'");
  return row.fields[index];
}

double parse_real(const Table& table, const Row& row, std::size_t index) {
  const auto& f = field(table, row, index);
  double value = 0.0;
  const auto* begin = f.text.data();
  const auto* end = begin + f.text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (f.text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    fail(table, row, index, "invalid number '" + f.text + "' in column '" + column_name(table, index) + "'");
  }
  return value;
}

long long parse_integer(const Table& table, const Row& row, std::size_t index) {
  const auto& f = field(table, row, index);
  long long value = 0;
  const auto* begin = f.text.data();
  const auto* end = begin + f.text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (f.text.empty() || ec != std::errc{} || ptr != end) {
    fail(table, row, index, "invalid integer '" + f.text + "' in column '" + column_name(table, index) + "'");
  }
  return value;
}

bool parse_bool(const Table& table, const Row& row, std::size_t index) {
  std::string text = field(table, row, index).text;
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(table, row, index, "invalid boolean '" + field(table, row, index).text + "'");
}

std::string escape(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos && trim(text) == text) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace netharm::csv
