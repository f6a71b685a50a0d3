#pragma once

#include "gcopula/copula_model.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace gcopula {

/// Masks exactly round(fraction * #observed) observed cells, chosen
/// uniformly without replacement. The last observed cell of a column is
/// never masked.
DataTable mask_mcar(const DataTable& table, double fraction, std::uint64_t seed);

/// Per-column MAE over evaluation cells (missing in `masked`, observed in
/// `truth`) divided by the MAE of imputing the median of the column's
/// observed entries in `masked`. NaN where undefined.
std::vector<double> smae(const DataTable& imputed, const DataTable& truth, const DataTable& masked);

/// Pooled MAE over all evaluation cells; NaN when there are none.
double mae(const DataTable& imputed, const DataTable& truth, const DataTable& masked);

/// Average of the defined entries; NaN when none is defined.
double mean_defined(const std::vector<double>& scores);

/// Fraction of evaluation cells with lower <= truth <= upper.
double coverage(const DataTable& lower, const DataTable& upper, const DataTable& truth, const DataTable& masked);

/// Forward map from latent z to one observed column.
class MarginalSpec {
 public:
  /// x = quantile(Phi(z)).
  static MarginalSpec continuous(std::function<double(double)> quantile);
  /// Levels with probabilities; converted to cutpoints Phi^-1(cumulative).
  static MarginalSpec ordinal_masses(std::vector<double> levels, const std::vector<double>& masses);
  /// Levels with latent cutpoints (one fewer than levels, increasing).
  static MarginalSpec ordinal_cutpoints(std::vector<double> levels, std::vector<double> cuts);
  /// x = clamp(quantile(Phi(z)), lower, upper); pass -inf/+inf for an open side.
  static MarginalSpec truncated(double lower, double upper, std::function<double(double)> quantile);

  double operator()(double z) const;

 private:
  enum class Kind { continuous, ordinal, truncated };
  Kind kind_ = Kind::continuous;
  std::function<double(double)> quantile_;
  std::vector<double> levels_;
  std::vector<double> cuts_;
  double lower_ = -kInf;
  double upper_ = kInf;
};

/// n rows of f(z) with z ~ N(0, Sigma) (dense) or z = W t + sigma eps
/// (factor form).
DataTable sample_gc(Index n, const std::vector<MarginalSpec>& specs,
                    const std::variant<Eigen::MatrixXd, LowRankParams>& dependence, std::uint64_t seed);

/// Latent draws only, n x p.
Eigen::MatrixXd sample_latent(Index n, const std::variant<Eigen::MatrixXd, LowRankParams>& dependence,
                              std::uint64_t seed);

}  // namespace gcopula
