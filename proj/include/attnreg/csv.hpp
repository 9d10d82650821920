#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "attnreg/core_linalg.hpp"

namespace attnreg::csv {

/// Shortest-unambiguous style: "%.17g".
std::string format_double(double v);

/// Numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  Matrix values;

  /// Index of `name` in the header or -1.
  int column(const std::string& name) const;
};

/// Comma-separated, header required, every field numeric. A column with no
/// numeric entries raises NonNumericColumn; a stray unparseable field or a
/// wrong field count raises ParseError naming the row, line and column.
Table read(std::istream& in);
Table read_file(const std::string& path);

void write(std::ostream& out, const std::vector<std::string>& header, const Matrix& values);

/// Splits a table into predictors and target. Throws MissingTarget.
void split_target(const Table& table, const std::string& target, Matrix& x, Vector& y,
                  std::vector<std::string>& predictor_names);

}  // namespace attnreg::csv
