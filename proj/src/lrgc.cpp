#include "gcopula/lrgc.hpp"

#include "gcopula/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace gcopula {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;
constexpr double kMinLogMass = -690.0;
constexpr double kMinNoise = 1e-6;

// Per-row factor posterior; everything here is |O| x k or k x k.
struct FactorRow {
  Eigen::MatrixXd Mk;  // (W_O^T W_O + sigma2 I)^-1
  Eigen::MatrixXd G;   // W_O Mk
  Eigen::VectorXd zhat;
  Eigen::VectorXd var;
  Eigen::VectorXd t_mean;
  Eigen::MatrixXd t_cov;
  Eigen::VectorXd prior_mean;
  Eigen::VectorXd prior_var;
  double loglik = 0.0;
};

FactorRow factor_row(const LowRankParams& params, const EncodedRow& row, int sweeps) {
  const Eigen::MatrixXd& W = params.W;
  const double s2 = params.sigma2;
  const Index k = W.cols();
  const auto o = static_cast<Index>(row.observed.size());

  Eigen::MatrixXd wo(o, k);
  for (Index r = 0; r < o; ++r) wo.row(r) = W.row(row.observed[static_cast<std::size_t>(r)]);

  FactorRow f;
  Eigen::MatrixXd a = wo.transpose() * wo;
  a.diagonal().array() += s2;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("factor system is not positive definite");
  f.Mk = llt.solve(Eigen::MatrixXd::Identity(k, k));
  f.G = wo * f.Mk;

  f.zhat = Eigen::VectorXd::Zero(o);
  f.var = Eigen::VectorXd::Zero(o);
  f.prior_mean = Eigen::VectorXd::Zero(o);
  f.prior_var = Eigen::VectorXd::Zero(o);
  std::vector<Index> interval_pos;
  for (Index r = 0; r < o; ++r) {
    const auto& iv = row.intervals[static_cast<std::size_t>(r)];
    if (iv.degenerate()) {
      f.zhat(r) = iv.lower;
    } else {
      const auto tm = truncnorm_moments(0.0, 1.0, iv);
      f.zhat(r) = tm.mean;
      f.var(r) = tm.variance;
      f.prior_var(r) = 1.0;
      interval_pos.push_back(r);
    }
  }

  Eigen::VectorXd u = wo.transpose() * f.zhat;
  double log_mass = 0.0;
  if (!interval_pos.empty()) {
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (Index r : interval_pos) {
        const double pjj = (1.0 - f.G.row(r).dot(wo.row(r))) / s2;
        const double pz = (f.zhat(r) - f.G.row(r).dot(u)) / s2;
        const double mu = f.zhat(r) - pz / pjj;
        const double v = 1.0 / pjj;
        const auto tm = truncnorm_moments(mu, v, row.intervals[static_cast<std::size_t>(r)]);
        u += (tm.mean - f.zhat(r)) * wo.row(r).transpose();
        f.zhat(r) = tm.mean;
        f.var(r) = tm.variance;
        f.prior_mean(r) = mu;
        f.prior_var(r) = v;
      }
    }
    for (Index r : interval_pos) {
      log_mass += std::max(kMinLogMass, normal_interval_logmass(f.prior_mean(r), f.prior_var(r),
                                                                row.intervals[static_cast<std::size_t>(r)]));
    }
    // The incremental updates drift only by rounding; refresh once.
    u = wo.transpose() * f.zhat;
  }

  f.t_mean = f.Mk * u;
  f.t_cov = s2 * f.Mk + f.G.transpose() * f.var.asDiagonal() * f.G;

  if (o > 0) {
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = static_cast<double>(o - k) * std::log(s2) + 2.0 * l.diagonal().array().log().sum();
    const double quad = (f.zhat.squaredNorm() - u.dot(f.Mk * u)) / s2;
    f.loglik = -0.5 * (static_cast<double>(o) * kLog2Pi + logdet + quad) + log_mass;
  }
  return f;
}

void rescale_rows(Eigen::MatrixXd& W, double sigma2) {
  const double target = std::sqrt(1.0 - sigma2);
  for (Index j = 0; j < W.rows(); ++j) {
    const double norm = W.row(j).norm();
    if (norm > 0.0) {
      W.row(j) *= target / norm;
    } else {
      W.row(j).setZero();
      W(j, 0) = target;
    }
  }
}

void print_iteration(std::ostream* out, int iteration, double change, double loglik) {
  if (out == nullptr) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "Iteration %d: copula parameter change %.4f, likelihood %.4f", iteration, change,
                loglik);
  *out << buf << '\n';
}

}  // namespace

RowPosterior low_rank_row_posterior(const LowRankParams& params, const EncodedRow& row, int sweeps) {
  const Eigen::MatrixXd& W = params.W;
  const Index p = W.rows();
  const FactorRow f = factor_row(params, row, sweeps);

  RowPosterior post;
  post.observed = row.observed;
  post.missing = row.missing;
  post.cond_mean = Eigen::VectorXd::Zero(p);
  post.cond_var = Eigen::VectorXd::Zero(p);
  post.prior_mean = Eigen::VectorXd::Zero(p);
  post.prior_var = Eigen::VectorXd::Zero(p);
  post.loglik = f.loglik;
  for (std::size_t r = 0; r < row.observed.size(); ++r) {
    const Index j = row.observed[r];
    const auto ri = static_cast<Index>(r);
    post.cond_mean(j) = f.zhat(ri);
    post.cond_var(j) = f.var(ri);
    post.prior_mean(j) = f.prior_mean(ri);
    post.prior_var(j) = f.prior_var(ri);
  }

  const auto m = static_cast<Index>(row.missing.size());
  Eigen::MatrixXd wm(m, W.cols());
  for (Index r = 0; r < m; ++r) wm.row(r) = W.row(row.missing[static_cast<std::size_t>(r)]);
  const Eigen::VectorXd mean_m = wm * f.t_mean;
  post.missing_var = Eigen::VectorXd(m);
  for (Index r = 0; r < m; ++r) {
    post.cond_mean(row.missing[static_cast<std::size_t>(r)]) = mean_m(r);
    post.missing_var(r) = params.sigma2 + params.sigma2 * wm.row(r).dot(f.Mk * wm.row(r).transpose());
  }
  post.law = FactorMissingLaw{f.G.transpose(), psd_sqrt(params.sigma2 * f.Mk), wm, std::sqrt(params.sigma2)};
  return post;
}

FactorStats factor_estep(const LowRankParams& params, const std::vector<EncodedRow>& rows, int sweeps,
                         int n_workers) {
  const Index p = params.W.rows();
  const Index k = params.W.cols();
  const std::size_t chunks = chunk_count(rows.size(), n_workers);

  auto empty_stats = [&] {
    FactorStats s;
    s.A.assign(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(k, k));
    s.b = Eigen::MatrixXd::Zero(p, k);
    s.c = Eigen::VectorXd::Zero(p);
    s.count = Eigen::VectorXd::Zero(p);
    return s;
  };
  std::vector<FactorStats> parts;
  for (std::size_t c = 0; c < chunks; ++c) parts.push_back(empty_stats());

  parallel_chunks(rows.size(), n_workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    FactorStats& s = parts[c];
    for (std::size_t i = begin; i < end; ++i) {
      const EncodedRow& row = rows[i];
      const FactorRow f = factor_row(params, row, sweeps);
      const Eigen::MatrixXd ett = f.t_mean * f.t_mean.transpose() + f.t_cov;
      for (std::size_t r = 0; r < row.observed.size(); ++r) {
        const Index j = row.observed[r];
        const auto ri = static_cast<Index>(r);
        s.A[static_cast<std::size_t>(j)] += ett;
        s.b.row(j) += f.zhat(ri) * f.t_mean.transpose() + f.var(ri) * f.G.row(ri);
        s.c(j) += f.zhat(ri) * f.zhat(ri) + f.var(ri);
        s.count(j) += 1.0;
      }
      s.loglik += f.loglik;
      s.rows += 1;
    }
  });

  FactorStats out = std::move(parts[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    for (Index j = 0; j < p; ++j) out.A[static_cast<std::size_t>(j)] += parts[c].A[static_cast<std::size_t>(j)];
    out.b += parts[c].b;
    out.c += parts[c].c;
    out.count += parts[c].count;
    out.loglik += parts[c].loglik;
    out.rows += parts[c].rows;
  }
  return out;
}

LowRankParams factor_mstep(const FactorStats& stats, const LowRankParams& previous) {
  const Index p = previous.W.rows();
  const Index k = previous.W.cols();
  LowRankParams next;
  next.W = previous.W;
  double resid = 0.0;
  double n_obs = 0.0;
  for (Index j = 0; j < p; ++j) {
    if (stats.count(j) <= 0.0) continue;
    const Eigen::MatrixXd& a = stats.A[static_cast<std::size_t>(j)];
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      llt.compute(a + 1e-8 * a.trace() / static_cast<double>(k) * Eigen::MatrixXd::Identity(k, k));
    }
    const Eigen::VectorXd wj = llt.solve(stats.b.row(j).transpose());
    next.W.row(j) = wj.transpose();
    resid += stats.c(j) - wj.dot(stats.b.row(j).transpose());
    n_obs += stats.count(j);
  }
  next.sigma2 = std::clamp(n_obs > 0.0 ? resid / n_obs : previous.sigma2, kMinNoise, 1.0 - kMinNoise);
  rescale_rows(next.W, next.sigma2);
  return next;
}

double low_rank_relative_change(const LowRankParams& a, const LowRankParams& b) {
  const Eigen::MatrixXd& V = a.W;
  const Eigen::MatrixXd& W = b.W;
  const double s = a.sigma2;
  const double t = b.sigma2;
  const auto p = static_cast<double>(V.rows());
  const double vv = (V.transpose() * V).squaredNorm();
  const double ww = (W.transpose() * W).squaredNorm();
  const double wv = (W.transpose() * V).squaredNorm();
  const double low = std::max(0.0, vv + ww - 2.0 * wv);
  const double trace_diff = W.squaredNorm() - V.squaredNorm();
  const double diff2 = low + 2.0 * (t - s) * trace_diff + p * (t - s) * (t - s);
  const double base2 = vv + 2.0 * s * V.squaredNorm() + p * s * s;
  return std::sqrt(std::max(0.0, diff2) / base2);
}

LowRankParams initial_low_rank(const std::vector<EncodedRow>& rows, Index p, Index rank, std::uint64_t seed) {
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, p);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < row.observed.size(); ++r) {
      const auto& iv = row.intervals[r];
      z(i, row.observed[r]) = iv.degenerate() ? iv.lower : truncnorm_moments(0.0, 1.0, iv).mean;
      mask(i, row.observed[r]) = 1.0;
    }
  }
  // Standardize over observed cells; missing cells stay at 0.
  for (Index j = 0; j < p; ++j) {
    const double count = mask.col(j).sum();
    if (count < 1.0) continue;
    const double mean = z.col(j).sum() / count;
    const double var = z.col(j).squaredNorm() / count - mean * mean;
    const double sd = var > 1e-12 ? std::sqrt(var) : 1.0;
    z.col(j) = ((z.col(j).array() - mean) / sd * mask.col(j).array()).matrix();
  }

  // Block power iteration for the top-k right singular subspace of z.
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd q(p, rank);
  for (Index a = 0; a < p; ++a) {
    for (Index b = 0; b < rank; ++b) q(a, b) = gauss(rng);
  }
  for (int it = 0; it < 30; ++it) {
    const Eigen::MatrixXd y = z.transpose() * (z * q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(p, rank);
  }
  const Eigen::MatrixXd bmat = z * q;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bmat, Eigen::ComputeThinV);
  const Eigen::MatrixXd v = q * svd.matrixV();
  const Eigen::VectorXd lam = svd.singularValues().array().square() / std::max<double>(1.0, static_cast<double>(n));

  const double total = z.squaredNorm() / std::max<double>(1.0, static_cast<double>(n));
  double sigma2 = (total - lam.sum()) / static_cast<double>(std::max<Index>(1, p - rank));
  sigma2 = std::clamp(sigma2, 0.01, 1.0 - 0.01);

  LowRankParams params;
  params.W = v * (lam.array() - sigma2).cwiseMax(1e-6).sqrt().matrix().asDiagonal();
  params.sigma2 = sigma2;
  rescale_rows(params.W, params.sigma2);
  return params;
}

CopulaModel fit_lrgc_with_marginals(const DataTable& table, std::vector<Marginal> marginals, Index rank,
                                    const FitConfig& config) {
  validate(config);
  const Index p = table.n_cols();
  if (rank < 1 || rank >= p) {
    throw std::invalid_argument("rank must satisfy 1 <= k < p (got k=" + std::to_string(rank) + ", p=" +
                                std::to_string(p) + ")");
  }
  if (config.mode != TrainingMode::standard) {
    throw std::invalid_argument("mini-batch training is not available for the low-rank model");
  }
  CopulaModel model;
  model.col_names = table.col_names();
  model.marginals = std::move(marginals);

  std::vector<EncodedRow> rows;
  {
    auto all = encode_table(model.marginals, table);
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].observed.empty()) {
        model.trace.excluded_rows.push_back(static_cast<Index>(i));
      } else {
        rows.push_back(std::move(all[i]));
      }
    }
  }
  if (rows.empty()) throw DataError("no row has an observed value");

  LowRankParams params = initial_low_rank(rows, p, rank, config.seed);
  FactorStats stats = factor_estep(params, rows, config.sweeps, config.n_workers);
  model.trace.rows_processed += rows.size();
  model.trace.initial_loglik = stats.loglik / static_cast<double>(stats.rows);
  for (int it = 1; it <= config.max_iter; ++it) {
    LowRankParams next = factor_mstep(stats, params);
    const double change = low_rank_relative_change(params, next);
    params = std::move(next);
    stats = factor_estep(params, rows, config.sweeps, config.n_workers);
    model.trace.rows_processed += rows.size();
    model.trace.batches += 1;
    const double ll = stats.loglik / static_cast<double>(stats.rows);
    model.trace.entries.push_back({it, change, ll});
    print_iteration(config.verbose, it, change, ll);
    if (change < config.tol) {
      model.trace.converged = true;
      break;
    }
  }
  if (config.verbose != nullptr) {
    if (model.trace.converged) {
      *config.verbose << "Convergence achieved at iteration " << model.trace.entries.back().iteration << '\n';
    } else {
      *config.verbose << "Convergence not achieved at maximum iterations\n";
    }
  }
  model.low_rank = std::move(params);
  return model;
}

CopulaModel fit_lrgc(const DataTable& table, Index rank, const FitConfig& config) {
  validate(config);
  return fit_lrgc_with_marginals(table, fit_marginals(table, resolve_types(table, config)), rank, config);
}

}  // namespace gcopula
