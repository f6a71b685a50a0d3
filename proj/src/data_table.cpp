#include "gcopula/data_table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gcopula {

DataTable::DataTable(Index n_rows, Index n_cols)
    : values_(Eigen::MatrixXd::Constant(n_rows, n_cols, kMissing)) {
  col_names_.reserve(static_cast<std::size_t>(n_cols));
  for (Index j = 0; j < n_cols; ++j) col_names_.push_back("x" + std::to_string(j + 1));
}

DataTable::DataTable(Eigen::MatrixXd values, std::vector<std::string> col_names)
    : values_(std::move(values)), col_names_(std::move(col_names)) {
  if (col_names_.empty()) {
    for (Index j = 0; j < values_.cols(); ++j) col_names_.push_back("x" + std::to_string(j + 1));
  }
  if (static_cast<Index>(col_names_.size()) != values_.cols()) {
    throw DataError("column name count does not match column count");
  }
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      const double v = values_(i, j);
      if (!is_missing(v) && !std::isfinite(v)) {
        throw DataError("non-finite value in column '" + col_names_[static_cast<std::size_t>(j)] +
                        "' row " + std::to_string(i + 1));
      }
    }
  }
}

void DataTable::set(Index i, Index j, double v) {
  if (!is_missing(v) && !std::isfinite(v)) {
    throw DataError("non-finite value in column '" + col_name(j) + "' row " + std::to_string(i + 1));
  }
  values_(i, j) = v;
}

std::vector<double> DataTable::observed(Index j) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_rows()));
  for (Index i = 0; i < n_rows(); ++i) {
    if (!missing(i, j)) out.push_back(values_(i, j));
  }
  return out;
}

Index DataTable::observed_count(Index j) const {
  Index c = 0;
  for (Index i = 0; i < n_rows(); ++i) c += missing(i, j) ? 0 : 1;
  return c;
}

Index DataTable::row_observed_count(Index i) const {
  Index c = 0;
  for (Index j = 0; j < n_cols(); ++j) c += missing(i, j) ? 0 : 1;
  return c;
}

DataTable DataTable::rows(const std::vector<Index>& idx) const {
  Eigen::MatrixXd out(static_cast<Index>(idx.size()), n_cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = values_.row(idx[r]);
  return DataTable(std::move(out), col_names_);
}

DataTable DataTable::row_range(Index begin, Index end) const {
  return DataTable(values_.middleRows(begin, end - begin), col_names_);
}

MaskSummary mask_summary(const DataTable& table) {
  MaskSummary s;
  const auto n = static_cast<double>(table.n_rows());
  for (Index j = 0; j < table.n_cols(); ++j) {
    const Index obs = table.observed_count(j);
    s.observed.push_back(obs);
    s.missing_fraction.push_back(n > 0 ? (n - static_cast<double>(obs)) / n : 0.0);
  }
  return s;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_nan_token(const std::string& s) {
  if (s.size() != 3) return false;
  return std::tolower(static_cast<unsigned char>(s[0])) == 'n' &&
         std::tolower(static_cast<unsigned char>(s[1])) == 'a' &&
         std::tolower(static_cast<unsigned char>(s[2])) == 'n';
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur.push_back('"');
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::vector<double> parse_csv_row(const std::string& line, Index n_cols, Index line_no) {
  auto fields = split_csv_line(line);
  if (static_cast<Index>(fields.size()) != n_cols) {
    throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_cols) +
                    " fields, found " + std::to_string(fields.size()));
  }
  std::vector<double> row(static_cast<std::size_t>(n_cols), kMissing);
  for (Index j = 0; j < n_cols; ++j) {
    const std::string& f = fields[static_cast<std::size_t>(j)];
    if (f.empty() || is_nan_token(f)) continue;
    double v = 0.0;
    const auto* first = f.data();
    const auto* last = f.data() + f.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      throw DataError("line " + std::to_string(line_no) + ", column " + std::to_string(j + 1) +
                      ": cannot parse '" + f + "' as a finite number");
    }
    row[static_cast<std::size_t>(j)] = v;
  }
  return row;
}

DataTable read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: header row required");
  std::vector<std::string> header = split_csv_line(line);
  const auto p = static_cast<Index>(header.size());
  std::vector<std::vector<double>> rows;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    rows.push_back(parse_csv_row(line, p, line_no));
  }
  Eigen::MatrixXd values(static_cast<Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < p; ++j) values(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return DataTable(std::move(values), std::move(header));
}

DataTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

std::string format_value(double v) {
  if (is_missing(v)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_csv(std::ostream& out, const DataTable& table) {
  for (Index j = 0; j < table.n_cols(); ++j) {
    if (j > 0) out << ',';
    out << table.col_name(j);
  }
  out << '\n';
  for (Index i = 0; i < table.n_rows(); ++i) {
    for (Index j = 0; j < table.n_cols(); ++j) {
      if (j > 0) out << ',';
      out << format_value(table(i, j));
    }
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const DataTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, table);
}

}  // namespace gcopula
