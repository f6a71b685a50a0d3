#pragma once

#include "gcopula/normal.hpp"
#include "gcopula/variable_type.hpp"

#include <span>
#include <vector>

namespace gcopula {

/// Monotone piecewise-linear quantile function built from weighted samples,
/// together with the matching CDF. Knot probabilities are cumulative
/// normalized weights scaled by n/(n+1); the CDF is floored at 1/(n+1) so
/// it never reaches 0 or 1. With uniform weights the quantile interpolates
/// linearly between adjacent order statistics. A sample whose weight
/// exceeds the uniform share 1/n holds its value flat over the excess.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  /// `values` need not be sorted. Weights must be nonnegative with a
  /// positive sum.
  EmpiricalDistribution(std::span<const double> values, std::span<const double> weights);

  bool empty() const { return n_ == 0; }
  std::size_t size() const { return n_; }
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }

  double cdf(double x) const;
  double quantile(double u) const;

 private:
  std::size_t n_ = 0;
  double floor_ = 0.0;
  std::vector<double> probs_;
  std::vector<double> values_;
};

/// Estimated marginal distribution of one column and its latent transforms.
class Marginal {
 public:
  Marginal() = default;

  static Marginal fit(std::span<const double> observed, const VariableType& type);
  static Marginal fit(std::span<const double> observed, std::span<const double> weights,
                      const VariableType& type);

  const VariableType& type() const { return type_; }
  VarKind kind() const { return type_.kind; }

  /// Set of latent values consistent with observing x.
  LatentInterval to_latent_interval(double x) const;
  /// Observed-space value for latent z.
  double from_latent(double z) const;

  /// Ordinal columns with a single observed level carry no dependence
  /// information.
  bool single_level() const { return kind() == VarKind::ordinal && levels_.size() == 1; }

  const std::vector<double>& levels() const { return levels_; }
  const std::vector<double>& masses() const { return masses_; }
  /// Latent thresholds between consecutive ordinal levels.
  const std::vector<double>& cutpoints() const { return cuts_; }
  double p_alpha() const { return p_alpha_; }
  double p_beta() const { return p_beta_; }
  /// Continuous part (whole column for continuous, interior for truncated).
  const EmpiricalDistribution& body() const { return body_; }

 private:
  std::size_t nearest_level(double x) const;

  VariableType type_;
  EmpiricalDistribution body_;
  std::vector<double> levels_;
  std::vector<double> masses_;
  std::vector<double> cuts_;
  double p_alpha_ = 0.0;
  double p_beta_ = 0.0;
  double z_alpha_ = -kInf;
  double z_beta_ = kInf;
};

/// Weights d^t for lags t = 1..m, most recent first. Entries that would
/// underflow are floored at the smallest normal double so all stay positive.
std::vector<double> decayed_weights(std::size_t window, double decay);

}  // namespace gcopula
