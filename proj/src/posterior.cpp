#include "gcopula/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gcopula {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;
constexpr double kMinLogMass = -690.0;  // log(1e-300)

}  // namespace

SpdFactor factor_spd(const Eigen::MatrixXd& a) {
  SpdFactor f;
  f.llt.compute(a);
  if (f.llt.info() == Eigen::Success) return f;
  const Index n = a.rows();
  for (double jitter = 1e-6; jitter <= 1e-2 * (1.0 + 1e-9); jitter *= 10.0) {
    f.llt.compute(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw SingularMatrixError("covariance block is not positive definite after jitter up to 1e-2");
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = a(rows[r], cols[c]);
    }
  }
  return out;
}

ConditionalGaussian conditional_mvn(const Eigen::MatrixXd& sigma, const std::vector<Index>& observed,
                                    const Eigen::VectorXd& values, const std::vector<Index>& missing) {
  if (static_cast<Index>(observed.size()) != values.size()) {
    throw std::invalid_argument("conditional_mvn: observed values do not match index set");
  }
  ConditionalGaussian out;
  const Eigen::MatrixXd s_mm = submatrix(sigma, missing, missing);
  if (missing.empty()) return {Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};
  if (observed.empty()) return {Eigen::VectorXd::Zero(s_mm.rows()), s_mm};
  const Eigen::MatrixXd s_oo = submatrix(sigma, observed, observed);
  const Eigen::MatrixXd s_om = submatrix(sigma, observed, missing);
  const SpdFactor f = factor_spd(s_oo);
  const Eigen::MatrixXd gain_t = f.llt.solve(s_om);  // Sigma_OO^{-1} Sigma_OM
  out.mean = gain_t.transpose() * values;
  out.cov = s_mm - s_om.transpose() * gain_t;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  const Index n = a.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

RowPosterior row_posterior(const Eigen::MatrixXd& sigma, const EncodedRow& row, int sweeps) {
  const Index p = sigma.rows();
  const auto& obs = row.observed;
  const auto& mis = row.missing;
  const auto o = static_cast<Index>(obs.size());
  const auto m = static_cast<Index>(mis.size());

  RowPosterior post;
  post.observed = obs;
  post.missing = mis;
  post.cond_mean = Eigen::VectorXd::Zero(p);
  post.cond_var = Eigen::VectorXd::Zero(p);
  post.prior_mean = Eigen::VectorXd::Zero(p);
  post.prior_var = Eigen::VectorXd::Zero(p);

  const Eigen::MatrixXd s_mm = submatrix(sigma, mis, mis);
  if (o == 0) {
    post.cond_cov_missing = s_mm;
    post.cross_cov = Eigen::MatrixXd::Zero(m, 0);
    post.missing_var = s_mm.diagonal();
    post.law = DenseMissingLaw{Eigen::MatrixXd::Zero(m, 0), psd_sqrt(s_mm)};
    return post;
  }

  const Eigen::MatrixXd s_oo = submatrix(sigma, obs, obs);
  const SpdFactor f = factor_spd(s_oo);

  Eigen::VectorXd zhat(o);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(o);
  std::vector<Index> interval_pos;
  for (Index k = 0; k < o; ++k) {
    const auto& iv = row.intervals[static_cast<std::size_t>(k)];
    if (iv.degenerate()) {
      zhat(k) = iv.lower;
    } else {
      const auto tm = truncnorm_moments(0.0, 1.0, iv);
      zhat(k) = tm.mean;
      var(k) = tm.variance;
      post.prior_var(obs[static_cast<std::size_t>(k)]) = 1.0;
      interval_pos.push_back(k);
    }
  }

  double log_mass = 0.0;
  if (!interval_pos.empty()) {
    const Eigen::MatrixXd precision = f.llt.solve(Eigen::MatrixXd::Identity(o, o));
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (Index k : interval_pos) {
        const double pkk = precision(k, k);
        const double mu = zhat(k) - precision.row(k).dot(zhat) / pkk;
        const double s2 = 1.0 / pkk;
        const auto tm = truncnorm_moments(mu, s2, row.intervals[static_cast<std::size_t>(k)]);
        zhat(k) = tm.mean;
        var(k) = tm.variance;
        post.prior_mean(obs[static_cast<std::size_t>(k)]) = mu;
        post.prior_var(obs[static_cast<std::size_t>(k)]) = s2;
      }
    }
    for (Index k : interval_pos) {
      const Index j = obs[static_cast<std::size_t>(k)];
      log_mass += std::max(kMinLogMass,
                           normal_interval_logmass(post.prior_mean(j), post.prior_var(j),
                                                   row.intervals[static_cast<std::size_t>(k)]));
    }
  }

  for (Index k = 0; k < o; ++k) {
    post.cond_mean(obs[static_cast<std::size_t>(k)]) = zhat(k);
    post.cond_var(obs[static_cast<std::size_t>(k)]) = var(k);
  }

  // Copula-density surrogate: Gaussian log-density of the latent means.
  const Eigen::VectorXd solved = f.llt.solve(zhat);
  const Eigen::MatrixXd l = f.llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  post.loglik = -0.5 * (static_cast<double>(o) * kLog2Pi + logdet + zhat.dot(solved)) + log_mass;

  if (m == 0) {
    post.cond_cov_missing = Eigen::MatrixXd(0, 0);
    post.cross_cov = Eigen::MatrixXd(0, o);
    post.missing_var = Eigen::VectorXd(0);
    post.law = DenseMissingLaw{Eigen::MatrixXd(0, o), Eigen::MatrixXd(0, 0)};
    return post;
  }

  const Eigen::MatrixXd s_om = submatrix(sigma, obs, mis);
  const Eigen::MatrixXd gain = f.llt.solve(s_om).transpose();  // |M| x |O|
  const Eigen::VectorXd mean_m = gain * zhat;
  for (Index r = 0; r < m; ++r) post.cond_mean(mis[static_cast<std::size_t>(r)]) = mean_m(r);

  Eigen::MatrixXd plug_in = s_mm - gain * s_om;
  plug_in = 0.5 * (plug_in + plug_in.transpose()).eval();
  post.missing_var = plug_in.diagonal().cwiseMax(0.0);
  post.cross_cov = gain * var.asDiagonal();
  post.cond_cov_missing = plug_in + post.cross_cov * gain.transpose();
  post.law = DenseMissingLaw{gain, psd_sqrt(plug_in)};
  return post;
}

double sample_truncnorm(double mu, double var, const LatentInterval& interval, Rng& rng) {
  if (interval.degenerate()) return interval.lower;
  const double sd = std::sqrt(var);
  double a = (interval.lower - mu) / sd;
  double b = (interval.upper - mu) / sd;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  bool flip = false;
  if (b <= 0.0) {
    flip = true;
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  double x = 0.0;
  if (a > 30.0) {
    // Deep tail: exponential proposal shifted to a, truncated at b.
    const double lambda = a;
    const double span = std::isfinite(b) ? -std::expm1(-lambda * (b - a)) : 1.0;
    for (;;) {
      const double u = unif(rng);
      const double e = -std::log1p(-u * span) / lambda;
      const double cand = a + e;
      if (unif(rng) <= std::exp(-0.5 * e * e)) {
        x = cand;
        break;
      }
    }
  } else if (a >= 0.0) {
    const double qa = std_normal_sf(a);
    const double qb = std::isfinite(b) ? std_normal_sf(b) : 0.0;
    double q = qb + unif(rng) * (qa - qb);
    q = std::clamp(q, std::numeric_limits<double>::min(), 0.5);
    x = -std_normal_quantile(q);
  } else {
    const double pa = std::isfinite(a) ? std_normal_cdf(a) : 0.0;
    const double pb = std::isfinite(b) ? std_normal_cdf(b) : 1.0;
    double u = pa + unif(rng) * (pb - pa);
    u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - 1e-16);
    x = std_normal_quantile(u);
  }
  x = std::clamp(x, a, b);
  if (flip) x = -x;
  return mu + sd * x;
}

Eigen::VectorXd draw_missing(const RowPosterior& posterior, const Eigen::VectorXd& z_observed, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  return std::visit(
      [&](const auto& law) -> Eigen::VectorXd {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, DenseMissingLaw>) {
          Eigen::VectorXd xi(law.chol.cols());
          for (Index k = 0; k < xi.size(); ++k) xi(k) = gauss(rng);
          Eigen::VectorXd out = law.chol * xi;
          if (law.gain.cols() > 0) out += law.gain * z_observed;
          return out;
        } else {
          Eigen::VectorXd xi(law.chol.cols());
          for (Index k = 0; k < xi.size(); ++k) xi(k) = gauss(rng);
          Eigen::VectorXd t = law.chol * xi;
          if (law.gain.cols() > 0) t += law.gain * z_observed;
          Eigen::VectorXd out = law.loadings * t;
          for (Index r = 0; r < out.size(); ++r) out(r) += law.noise_sd * gauss(rng);
          return out;
        }
      },
      posterior.law);
}

}  // namespace gcopula
