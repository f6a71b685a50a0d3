#pragma once

#include <limits>

namespace gcopula {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal CDF. Accurate in both tails (computed through erfc).
double std_normal_cdf(double z);
/// Upper tail 1 - Phi(z), without cancellation for large z.
double std_normal_sf(double z);
double std_normal_pdf(double z);
double std_normal_logpdf(double z);
/// Inverse of std_normal_cdf on (0, 1); maps 0 and 1 to -inf and +inf.
/// Throws std::domain_error outside [0, 1].
double std_normal_quantile(double p);

/// Scaled complementary error function exp(x^2) * erfc(x) for x >= 0.
double erfcx(double x);

/// Closed interval of the extended real line. lower == upper encodes a point.
struct LatentInterval {
  double lower = -kInf;
  double upper = kInf;

  static LatentInterval point(double z) { return {z, z}; }
  static LatentInterval whole() { return {}; }

  bool degenerate() const { return lower == upper; }
  bool contains(double z) const { return lower <= z && z <= upper; }

  friend bool operator==(const LatentInterval&, const LatentInterval&) = default;
};

struct TruncatedMoments {
  double mean = 0.0;
  double variance = 0.0;
  /// Probability of the interval under the untruncated law.
  double mass = 0.0;
  /// Set when the mass underflows; mean is then the endpoint nearest mu.
  bool zero_mass = false;
};

/// Mean, variance and mass of N(mu, var) restricted to `interval`.
TruncatedMoments truncnorm_moments(double mu, double var, const LatentInterval& interval);

/// log P(interval) under N(mu, var), evaluated in the tail that avoids
/// cancellation.
double normal_interval_logmass(double mu, double var, const LatentInterval& interval);

}  // namespace gcopula
