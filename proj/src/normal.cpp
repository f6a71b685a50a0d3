#include "gcopula/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gcopula {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;
constexpr double kInvSqrt2Pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
constexpr double kSqrt2OverPi = std::numbers::sqrt2 * std::numbers::inv_sqrtpi;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

struct StdMoments {
  double mean;
  double variance;
  bool ok;
};

// Moments of N(0,1) on [a, b] with 0 <= a < b <= inf. Ratios phi/Z are
// formed from erfcx so nothing underflows however deep the tail.
StdMoments upper_tail_moments(double a, double b) {
  const double ea = erfcx(a / kSqrt2);
  double decay = 0.0;
  double eb = 0.0;
  if (std::isfinite(b)) {
    decay = std::exp(-0.5 * (b - a) * (b + a));
    eb = erfcx(b / kSqrt2);
  }
  const double d = ea - eb * decay;
  if (!(d > 0.0) || !std::isfinite(d)) return {0.0, 0.0, false};
  const double lam_a = kSqrt2OverPi / d;
  const double lam_b = kSqrt2OverPi * decay / d;
  const double m = lam_a - lam_b;
  double v = 1.0 + (a - m) * lam_a;
  if (std::isfinite(b)) v -= (b - m) * lam_b;
  return {m, v, std::isfinite(m) && std::isfinite(v)};
}

StdMoments standard_moments(double a, double b) {
  if (a >= 0.0) return upper_tail_moments(a, b);
  if (b <= 0.0) {
    auto r = upper_tail_moments(-b, -a);
    r.mean = -r.mean;
    return r;
  }
  const double z = std_normal_cdf(b) - std_normal_cdf(a);
  const double pa = std::isfinite(a) ? std_normal_pdf(a) : 0.0;
  const double pb = std::isfinite(b) ? std_normal_pdf(b) : 0.0;
  const double m = (pa - pb) / z;
  double v = 1.0;
  if (std::isfinite(a)) v += (a - m) * pa / z;
  if (std::isfinite(b)) v -= (b - m) * pb / z;
  return {m, v, z > 0.0 && std::isfinite(m) && std::isfinite(v)};
}

double upper_tail_logmass(double a, double b) {
  const double ea = erfcx(a / kSqrt2);
  double d = ea;
  if (std::isfinite(b)) d -= erfcx(b / kSqrt2) * std::exp(-0.5 * (b - a) * (b + a));
  if (!(d > 0.0)) return -kInf;
  return std::log(0.5) - 0.5 * a * a + std::log(d);
}

}  // namespace

double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 5.0) return std::exp(x * x) * std::erfc(x);
  // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
  double t = x;
  for (int n = 120; n >= 1; --n) t = x + 0.5 * n / t;
  return kInvSqrtPi / t;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double std_normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_normal_logpdf(double z) { return -kLogSqrt2Pi - 0.5 * z * z; }

double std_normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("normal quantile requires p in [0, 1]");
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  if (p == 0.5) return 0.0;
  // erfc_inv is evaluated on the smaller tail for full relative accuracy.
  if (p < 0.5) return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
  return kSqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
}

TruncatedMoments truncnorm_moments(double mu, double var, const LatentInterval& interval) {
  if (!(var > 0.0) || !std::isfinite(var)) throw std::invalid_argument("truncnorm_moments: var must be positive");
  if (!(interval.lower <= interval.upper)) throw std::invalid_argument("truncnorm_moments: empty interval");
  if (interval.degenerate()) return {interval.lower, 0.0, 0.0, true};

  const double sd = std::sqrt(var);
  const double a = (interval.lower - mu) / sd;
  const double b = (interval.upper - mu) / sd;

  TruncatedMoments out;
  out.mass = std::exp(normal_interval_logmass(mu, var, interval));
  out.zero_mass = !(out.mass > 0.0);

  const StdMoments s = standard_moments(a, b);
  if (!s.ok) {
    out.mean = (b <= 0.0) ? interval.upper : interval.lower;
    out.variance = 0.0;
    out.zero_mass = true;
    return out;
  }
  out.mean = mu + sd * std::clamp(s.mean, a, b);
  out.variance = var * std::clamp(s.variance, 0.0, 1.0);
  return out;
}

double normal_interval_logmass(double mu, double var, const LatentInterval& interval) {
  if (interval.degenerate()) return -kInf;
  const double sd = std::sqrt(var);
  const double a = (interval.lower - mu) / sd;
  const double b = (interval.upper - mu) / sd;
  if (a >= 0.0) return upper_tail_logmass(a, b);
  if (b <= 0.0) return upper_tail_logmass(-b, -a);
  return std::log(std_normal_cdf(b) - std_normal_cdf(a));
}

}  // namespace gcopula
