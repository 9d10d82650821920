#include "attnreg/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "attnreg/error.hpp"

namespace attnreg::csv {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int Table::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

}  // namespace

Table read(std::istream& in) {
  Table table;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorKind::ParseError, "empty input, header row required");
  table.header = split(line);

  std::vector<std::vector<std::string>> rows;
  std::vector<size_t> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(table.header.size()) +
                                             " fields, got " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
    row_lines.push_back(line_no);
  }

  const size_t ncol = table.header.size();
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncol));
  for (size_t j = 0; j < ncol; ++j) {
    size_t first_bad = rows.size();
    size_t bad = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      double v = 0.0;
      if (parse_number(rows[i][j], v)) {
        table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      } else {
        if (first_bad == rows.size()) first_bad = i;
        ++bad;
      }
    }
    if (bad == 0) continue;
    if (bad == rows.size()) {
      throw Error(ErrorKind::NonNumericColumn, "column '" + table.header[j] + "' is not numeric");
    }
    throw Error(ErrorKind::ParseError,
                "row " + std::to_string(first_bad + 1) + " (line " +
                    std::to_string(row_lines[first_bad]) + "), column '" + table.header[j] +
                    "': cannot parse '" + rows[first_bad][j] + "'");
  }
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  return read(in);
}

void write(std::ostream& out, const std::vector<std::string>& header, const Matrix& values) {
  for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out << (j ? "," : "") << format_double(values(i, j));
    }
    out << '\n';
  }
}

void split_target(const Table& table, const std::string& target, Matrix& x, Vector& y,
                  std::vector<std::string>& predictor_names) {
  const int t = table.column(target);
  if (t < 0) throw Error(ErrorKind::MissingTarget, "target column '" + target + "' not found");
  const Eigen::Index p = table.values.cols() - 1;
  if (p < 1) throw Error(ErrorKind::ParseError, "no predictor columns besides the target");
  x.resize(table.values.rows(), p);
  predictor_names.clear();
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
    if (j == t) continue;
    x.col(k++) = table.values.col(j);
    predictor_names.push_back(table.header[static_cast<size_t>(j)]);
  }
  y = table.values.col(t);
}

}  // namespace attnreg::csv
