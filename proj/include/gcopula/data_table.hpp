#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcopula {

using Index = Eigen::Index;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Raised when input data cannot be read or does not satisfy a structural
/// precondition (shape, empty column, malformed cell).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n x p grid of optional real values. Missing cells are stored as NaN;
/// every stored non-missing value is finite.
class DataTable {
 public:
  DataTable() = default;
  DataTable(Index n_rows, Index n_cols);
  explicit DataTable(Eigen::MatrixXd values, std::vector<std::string> col_names = {});

  Index n_rows() const { return values_.rows(); }
  Index n_cols() const { return values_.cols(); }

  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& col_names() const { return col_names_; }
  const std::string& col_name(Index j) const { return col_names_[static_cast<std::size_t>(j)]; }

  double operator()(Index i, Index j) const { return values_(i, j); }
  bool missing(Index i, Index j) const { return is_missing(values_(i, j)); }

  void set(Index i, Index j, double v);
  void set_missing(Index i, Index j) { values_(i, j) = kMissing; }

  /// Observed (non-missing) values of column j in row order.
  std::vector<double> observed(Index j) const;
  Index observed_count(Index j) const;
  Index row_observed_count(Index i) const;

  DataTable rows(const std::vector<Index>& idx) const;
  DataTable row_range(Index begin, Index end) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> col_names_;
};

struct MaskSummary {
  std::vector<Index> observed;
  std::vector<double> missing_fraction;
};

MaskSummary mask_summary(const DataTable& table);

/// Reads a comma-separated file with a header row. Empty fields and the
/// token NaN (any case) are missing.
DataTable read_csv(std::istream& in);
DataTable read_csv_file(const std::string& path);

/// Writes values with 6 significant digits; missing cells become empty.
void write_csv(std::ostream& out, const DataTable& table);
void write_csv_file(const std::string& path, const DataTable& table);

/// Parses a single data line against an expected column count. Used by the
/// streaming reader.
std::vector<double> parse_csv_row(const std::string& line, Index n_cols, Index line_no);
std::vector<std::string> split_csv_line(const std::string& line);
std::string format_value(double v);

}  // namespace gcopula
