#include "kcde/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace kcde::csv {

namespace {

std::string_view
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view>
split(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

std::string
where(std::string_view source, std::size_t line)
{
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

} // namespace

Table
parse(std::istream& in, std::string_view source)
{
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split(line);
    if (t.header.empty()) {
      for (auto f : fields) {
        if (f.empty()) {
          throw DataError(where(source, lineno) + "empty column name in header");
        }
        t.header.emplace_back(f);
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(where(source, lineno) + "expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto f = fields[k];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[k]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError(where(source, lineno) + "column '" + t.header[k] +
                        "': cannot parse '" + std::string(f) + "' as a number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) {
    throw DataError(std::string(source) + ": missing header row");
  }
  return t;
}

Table
read_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  return parse(in, path);
}

std::size_t
resolve_column(const Table& table, const std::string& y_col)
{
  if (y_col.empty()) {
    return table.header.size() - 1;
  }
  const auto named = std::find(table.header.begin(), table.header.end(), y_col);
  if (named != table.header.end()) {
    return static_cast<std::size_t>(named - table.header.begin());
  }
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(y_col.data(), y_col.data() + y_col.size(), index);
  if (ec == std::errc() && ptr == y_col.data() + y_col.size() && index < table.header.size()) {
    return index;
  }
  throw DataError("no column named or indexed '" + y_col + "'");
}

RawDataset
to_dataset(const Table& table, const std::string& y_col)
{
  if (table.header.size() < 2) {
    throw DataError("need at least one predictor column and one response column");
  }
  const std::size_t yc = resolve_column(table, y_col);
  const std::size_t d = table.header.size() - 1;
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(table.rows.size() * d);
  y.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == yc) {
        y.push_back(row[k]);
      } else {
        x.push_back(row[k]);
      }
    }
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (k != yc) {
      names.push_back(table.header[k]);
    }
  }
  return RawDataset(d, std::move(x), std::move(y), std::move(names), table.header[yc]);
}

std::string
format(double v)
{
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void
write_row(std::ostream& out, const std::vector<std::string>& fields)
{
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k > 0) {
      out << ',';
    }
    out << fields[k];
  }
  out << '\n';
}

} // namespace kcde::csv
