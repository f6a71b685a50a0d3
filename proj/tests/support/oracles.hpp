#pragma once

// Reference computations that share no code with the library: quadrature
// for truncated-normal moments, explicit inverses for Gaussian
// conditioning, and a chi-square tail from Boost.

#include <Eigen/Dense>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct Moments {
  double mean;
  double variance;
  double mass;
};

inline double density(double x, double mu, double sd) {
  const double t = (x - mu) / sd;
  return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * M_PI));
}

// Moments of N(mu, var) on [lo, hi] by adaptive Gauss-Kronrod quadrature.
// The integrand is centred at the mode of the truncated density and scaled
// by its value there so deep-tail intervals stay well conditioned.
inline Moments truncnorm(double mu, double var, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  const double sd = std::sqrt(var);
  double a = (lo - mu) / sd;
  double b = (hi - mu) / sd;
  bool flip = false;
  if (b <= 0.0) {
    flip = true;
    const double t = a;
    a = -b;
    b = -t;
  }
  // Mode of the standardized truncated density.
  const double c = a > 0.0 ? a : 0.0;
  auto w = [c](double x) { return std::exp(-0.5 * (x - c) * (x + c)); };  // phi(x)/phi(c)
  const double inf = std::numeric_limits<double>::infinity();
  auto integrate = [&](auto f) {
    if (std::isinf(b) && std::isinf(a)) return gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14);
    if (std::isinf(b)) return gauss_kronrod<double, 61>::integrate(f, a, inf, 15, 1e-14);
    if (std::isinf(a)) return gauss_kronrod<double, 61>::integrate(f, -inf, b, 15, 1e-14);
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
  };
  const double z = integrate([&](double x) { return w(x); });
  const double m = integrate([&](double x) { return (x - c) * w(x); }) / z + c;
  const double v = integrate([&](double x) { return (x - m) * (x - m) * w(x); }) / z;
  const double mass = z * std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
  return {mu + sd * (flip ? -m : m), var * v, mass};
}

struct Conditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// z_M | z_O for z ~ N(0, sigma), using a full-pivot LU inverse of Sigma_OO.
inline Conditional mvn_conditional(const Eigen::MatrixXd& sigma, const std::vector<long>& obs,
                                   const Eigen::VectorXd& z_obs, const std::vector<long>& mis) {
  const long o = static_cast<long>(obs.size());
  const long m = static_cast<long>(mis.size());
  Eigen::MatrixXd soo(o, o), smo(m, o), smm(m, m);
  for (long r = 0; r < o; ++r)
    for (long c = 0; c < o; ++c) soo(r, c) = sigma(obs[r], obs[c]);
  for (long r = 0; r < m; ++r)
    for (long c = 0; c < o; ++c) smo(r, c) = sigma(mis[r], obs[c]);
  for (long r = 0; r < m; ++r)
    for (long c = 0; c < m; ++c) smm(r, c) = sigma(mis[r], mis[c]);
  const Eigen::MatrixXd inv = soo.fullPivLu().inverse();
  return {smo * inv * z_obs, smm - smo * inv * smo.transpose()};
}

// Upper tail probability of a chi-square statistic.
inline double chi_square_pvalue(double stat, double dof) {
  const boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracle
