#include "gcopula/copula_em.hpp"

#include "gcopula/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace gcopula {

namespace {

void print_iteration(std::ostream* out, int iteration, double change, double loglik) {
  if (out == nullptr) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "Iteration %d: copula parameter change %.4f, likelihood %.4f", iteration, change,
                loglik);
  *out << buf << '\n';
}

void pin(Eigen::MatrixXd& r, const std::vector<Index>& pinned) {
  for (Index j : pinned) {
    r.row(j).setZero();
    r.col(j).setZero();
    r(j, j) = 1.0;
  }
}

std::vector<EncodedRow> usable_rows(std::vector<EncodedRow> rows, FitTrace& trace) {
  std::vector<EncodedRow> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].observed.empty()) {
      trace.excluded_rows.push_back(static_cast<Index>(i));
    } else {
      out.push_back(std::move(rows[i]));
    }
  }
  if (out.empty()) throw DataError("no row has an observed value");
  return out;
}

}  // namespace

void accumulate_second_moment(const RowPosterior& post, Eigen::MatrixXd& S) {
  S.selfadjointView<Eigen::Lower>().rankUpdate(post.cond_mean);
  const auto& obs = post.observed;
  const auto& mis = post.missing;
  for (std::size_t k = 0; k < obs.size(); ++k) S(obs[k], obs[k]) += post.cond_var(obs[k]);
  if (mis.empty()) return;
  for (std::size_t r = 0; r < mis.size(); ++r) {
    const Index a = mis[r];
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const double c = post.cross_cov(static_cast<Index>(r), static_cast<Index>(k));
      const Index b = obs[k];
      if (a > b) {
        S(a, b) += c;
      } else {
        S(b, a) += c;
      }
    }
    for (std::size_t s = 0; s <= r; ++s) {
      const Index b = mis[s];
      const double c = post.cond_cov_missing(static_cast<Index>(r), static_cast<Index>(s));
      if (a >= b) {
        S(a, b) += c;
      } else {
        S(b, a) += c;
      }
    }
  }
}

EStepResult estep(const Eigen::MatrixXd& sigma, const std::vector<EncodedRow>& rows, int sweeps, int n_workers,
                  bool keep_means) {
  const Index p = sigma.rows();
  const std::size_t n = rows.size();
  const std::size_t chunks = chunk_count(n, n_workers);
  std::vector<Eigen::MatrixXd> s_part(chunks, Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::VectorXd> m_part(chunks, Eigen::VectorXd::Zero(p));
  std::vector<double> ll_part(chunks, 0.0);

  EStepResult out;
  if (keep_means) out.latent_means = Eigen::MatrixXd::Zero(static_cast<Index>(n), p);

  parallel_chunks(n, n_workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RowPosterior post;
      try {
        post = row_posterior(sigma, rows[i], sweeps);
      } catch (const SingularMatrixError& e) {
        throw SingularMatrixError("fitting row " + std::to_string(i + 1) + ": " + e.what());
      }
      accumulate_second_moment(post, s_part[c]);
      m_part[c] += post.cond_mean;
      ll_part[c] += post.loglik;
      if (keep_means) out.latent_means.row(static_cast<Index>(i)) = post.cond_mean.transpose();
    }
  });

  out.S = Eigen::MatrixXd::Zero(p, p);
  out.m = Eigen::VectorXd::Zero(p);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.S += s_part[c];
    out.m += m_part[c];
    out.loglik += ll_part[c];
  }
  out.S.triangularView<Eigen::StrictlyUpper>() = out.S.transpose().eval();
  out.rows = static_cast<Index>(n);
  return out;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd r = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd inv = r.diagonal().cwiseSqrt().cwiseInverse();
  r = inv.asDiagonal() * r * inv.asDiagonal();
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  return r;
}

Eigen::MatrixXd mstep(const Eigen::MatrixXd& S, double n, const std::vector<Index>& pinned) {
  const Index p = S.rows();
  Eigen::VectorXd d = S.diagonal() / n;
  for (Index j = 0; j < p; ++j) {
    if (std::find(pinned.begin(), pinned.end(), j) != pinned.end()) {
      d(j) = 1.0;
      continue;
    }
    if (!(d(j) > 0.0) || !std::isfinite(d(j))) {
      throw std::invalid_argument("mstep: nonpositive expected second moment for column " + std::to_string(j));
    }
  }
  const Eigen::VectorXd inv = d.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd r = inv.asDiagonal() * (S / n) * inv.asDiagonal();
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  pin(r, pinned);

  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < 0.0) {
      r = project_psd(r, 0.0);
      pin(r, pinned);
    }
  }
  return r;
}

double relative_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (b - a).norm() / a.norm();
}

Eigen::MatrixXd initial_corr(const std::vector<EncodedRow>& rows, Index p, const std::vector<Index>& pinned) {
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, p);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < row.observed.size(); ++k) {
      const Index j = row.observed[k];
      const auto& iv = row.intervals[k];
      z(i, j) = iv.degenerate() ? iv.lower : truncnorm_moments(0.0, 1.0, iv).mean;
      mask(i, j) = 1.0;
    }
  }
  const Eigen::MatrixXd count = mask.transpose() * mask;
  if (count.minCoeff() < 2.0) return Eigen::MatrixXd::Identity(p, p);

  // sum(j, k) = sum of z_j over rows where j and k are both observed.
  const Eigen::MatrixXd sum = z.transpose() * mask;
  const Eigen::MatrixXd sumsq = z.cwiseProduct(z).transpose() * mask;
  const Eigen::MatrixXd cross = z.transpose() * z;

  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (Index j = 0; j < p; ++j) {
    for (Index k = 0; k < j; ++k) {
      const double c = count(j, k);
      const double mj = sum(j, k) / c;
      const double mk = sum(k, j) / c;
      const double cov = cross(j, k) / c - mj * mk;
      const double vj = sumsq(j, k) / c - mj * mj;
      const double vk = sumsq(k, j) / c - mk * mk;
      double rho = 0.0;
      if (vj > 0.0 && vk > 0.0) rho = std::clamp(cov / std::sqrt(vj * vk), -1.0, 1.0);
      r(j, k) = rho;
      r(k, j) = rho;
    }
  }
  pin(r, pinned);
  r = project_psd(r, 1e-4);
  pin(r, pinned);
  return r;
}

double approx_loglik(const CopulaModel& model, const std::vector<EncodedRow>& rows, int sweeps, int n_workers) {
  const std::size_t chunks = chunk_count(rows.size(), n_workers);
  std::vector<double> part(chunks, 0.0);
  std::vector<std::size_t> used(chunks, 0);
  parallel_chunks(rows.size(), n_workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (rows[i].observed.empty()) continue;
      part[c] += model_posterior(model, rows[i], sweeps).loglik;
      ++used[c];
    }
  });
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += part[c];
    count += used[c];
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

CopulaModel fit_with_marginals(const DataTable& table, std::vector<Marginal> marginals, const FitConfig& config) {
  validate(config);
  const Index p = table.n_cols();
  if (static_cast<Index>(marginals.size()) != p) throw DataError("marginal count does not match column count");

  CopulaModel model;
  model.col_names = table.col_names();
  model.marginals = std::move(marginals);
  const auto rows = usable_rows(encode_table(model.marginals, table), model.trace);
  const auto pinned = pinned_columns(model.marginals);

  Eigen::MatrixXd sigma = initial_corr(rows, p, pinned);
  EStepResult e = estep(sigma, rows, config.sweeps, config.n_workers);
  model.trace.rows_processed += rows.size();
  model.trace.initial_loglik = e.loglik / static_cast<double>(e.rows);

  for (int it = 1; it <= config.max_iter; ++it) {
    Eigen::MatrixXd next = mstep(e.S, static_cast<double>(e.rows), pinned);
    const double change = relative_change(sigma, next);
    sigma = std::move(next);
    e = estep(sigma, rows, config.sweeps, config.n_workers);
    model.trace.rows_processed += rows.size();
    model.trace.batches += 1;
    const double ll = e.loglik / static_cast<double>(e.rows);
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
  model.corr = std::move(sigma);
  return model;
}

CopulaModel fit_standard(const DataTable& table, const FitConfig& config) {
  validate(config);
  const auto types = resolve_types(table, config);
  return fit_with_marginals(table, fit_marginals(table, types), config);
}

CopulaModel fit_minibatch_offline(const DataTable& table, const FitConfig& config) {
  validate(config);
  const Index p = table.n_cols();
  if (config.batch_size < p) {
    throw std::invalid_argument("batch size must be ≥ p (got " + std::to_string(config.batch_size) + " for " +
                                std::to_string(p) + " columns); use the low-rank model for wide data");
  }
  CopulaModel model;
  model.col_names = table.col_names();
  model.marginals = fit_marginals(table, resolve_types(table, config));
  const auto rows = usable_rows(encode_table(model.marginals, table), model.trace);
  const auto pinned = pinned_columns(model.marginals);

  const std::size_t n = rows.size();
  const auto s = static_cast<std::size_t>(config.batch_size);
  const std::size_t per_pass = (n + s - 1) / s;
  const std::size_t total = per_pass * static_cast<std::size_t>(config.num_pass);

  double prev_eta = 1.0;
  for (std::size_t t = 1; t <= total; ++t) {
    const double eta = config.stepsize(static_cast<int>(t));
    if (!(eta > 0.0 && eta < 1.0)) {
      throw std::invalid_argument("step size at iteration " + std::to_string(t) + " is outside (0, 1)");
    }
    if (eta > prev_eta) throw std::invalid_argument("step size must be nonincreasing in t");
    prev_eta = eta;
  }

  Eigen::MatrixXd sigma = initial_corr(rows, p, pinned);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  int t = 0;
  std::vector<EncodedRow> batch;
  for (int pass = 0; pass < config.num_pass; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < per_pass; ++b) {
      batch.clear();
      for (std::size_t k = b * s; k < std::min(n, (b + 1) * s); ++k) batch.push_back(rows[order[k]]);
      const EStepResult e = estep(sigma, batch, config.sweeps, config.n_workers);
      const Eigen::MatrixXd hat = mstep(e.S, static_cast<double>(e.rows), pinned);
      ++t;
      const double eta = config.stepsize(t);
      Eigen::MatrixXd next = (1.0 - eta) * sigma + eta * hat;
      next.diagonal().setOnes();
      const double change = relative_change(sigma, next);
      sigma = std::move(next);
      model.trace.rows_processed += batch.size();
      model.trace.batches += 1;
      const double ll = e.loglik / static_cast<double>(e.rows);
      model.trace.entries.push_back({t, change, ll});
      print_iteration(config.verbose, t, change, ll);
    }
  }
  model.corr = std::move(sigma);
  return model;
}

CopulaModel fit_copula(const DataTable& table, const FitConfig& config) {
  switch (config.mode) {
    case TrainingMode::standard: return fit_standard(table, config);
    case TrainingMode::minibatch_offline: return fit_minibatch_offline(table, config);
  }
  throw std::invalid_argument("unknown training mode");
}

}  // namespace gcopula
