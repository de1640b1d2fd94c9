#pragma once

#include "kcde/dataset.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kcde::csv {

//! Numeric table with a header row.
struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

//! Parses comma-separated text. Blank lines are skipped; every other line
//! must have as many fields as the header, each a finite-or-not number.
//! Errors name the 1-based line number.
Table parse(std::istream& in, std::string_view source = "input");
Table read_file(const std::string& path);

//! Index of the response column: a header name, else a 0-based index, else
//! the last column when `y_col` is empty.
std::size_t resolve_column(const Table& table, const std::string& y_col);

//! Splits a table into predictors and response.
RawDataset to_dataset(const Table& table, const std::string& y_col);

//! Shortest text that reads back to the same double.
std::string format(double v);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace kcde::csv
