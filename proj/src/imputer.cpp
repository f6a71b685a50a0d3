#include "gcopula/imputer.hpp"

#include "gcopula/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcopula {

namespace {

void check_shape(const CopulaModel& model, const DataTable& table) {
  if (table.n_cols() != model.n_cols()) {
    throw DataError("table has " + std::to_string(table.n_cols()) + " columns but the model has " +
                    std::to_string(model.n_cols()));
  }
}

Rng row_rng(std::uint64_t seed, Index row) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(static_cast<std::uint64_t>(row) >> 32)};
  return Rng(seq);
}

// One joint draw of the latent row: interval cells from their truncated
// conditionals, point cells fixed, missing cells from the Gaussian law.
Eigen::VectorXd draw_latent(const RowPosterior& post, const EncodedRow& row, Rng& rng) {
  const auto o = static_cast<Index>(row.observed.size());
  Eigen::VectorXd z = post.cond_mean;
  Eigen::VectorXd zo(o);
  for (Index k = 0; k < o; ++k) {
    const Index j = row.observed[static_cast<std::size_t>(k)];
    const auto& iv = row.intervals[static_cast<std::size_t>(k)];
    zo(k) = iv.degenerate() ? iv.lower : sample_truncnorm(post.prior_mean(j), post.prior_var(j), iv, rng);
    z(j) = zo(k);
  }
  if (!row.missing.empty()) {
    const Eigen::VectorXd zm = draw_missing(post, zo, rng);
    for (std::size_t r = 0; r < row.missing.size(); ++r) z(row.missing[r]) = zm(static_cast<Index>(r));
  }
  return z;
}

}  // namespace

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ImputationResult impute_single(const CopulaModel& model, const DataTable& table, const ImputeOptions& options) {
  check_shape(model, table);
  const Index n = table.n_rows();
  const Index p = table.n_cols();
  ImputationResult out;
  out.imputed = table;
  out.latent_means = Eigen::MatrixXd::Zero(n, p);
  parallel_chunks(static_cast<std::size_t>(n), options.n_workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Index>(begin); i < static_cast<Index>(end); ++i) {
      const EncodedRow row = encode_row(model.marginals, table.values().row(i));
      const RowPosterior post = model_posterior(model, row, options.sweeps, i);
      out.latent_means.row(i) = post.cond_mean.transpose();
      for (Index j : row.missing) {
        out.imputed.set(i, j, model.marginals[static_cast<std::size_t>(j)].from_latent(post.cond_mean(j)));
      }
    }
  });
  return out;
}

ImputationResult transform_out_of_sample(const CopulaModel& model, const DataTable& rows,
                                         const ImputeOptions& options) {
  return impute_single(model, rows, options);
}

std::vector<DataTable> impute_multiple(const CopulaModel& model, const DataTable& table, int num, std::uint64_t seed,
                                       const ImputeOptions& options) {
  check_shape(model, table);
  if (num < 1) throw std::invalid_argument("number of imputations must be at least 1");
  const Index n = table.n_rows();
  std::vector<DataTable> out(static_cast<std::size_t>(num), table);
  parallel_chunks(static_cast<std::size_t>(n), options.n_workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Index>(begin); i < static_cast<Index>(end); ++i) {
      const EncodedRow row = encode_row(model.marginals, table.values().row(i));
      if (row.missing.empty()) continue;
      const RowPosterior post = model_posterior(model, row, options.sweeps, i);
      Rng rng = row_rng(seed, i);
      for (int d = 0; d < num; ++d) {
        const Eigen::VectorXd z = draw_latent(post, row, rng);
        for (Index j : row.missing) {
          out[static_cast<std::size_t>(d)].set(i, j, model.marginals[static_cast<std::size_t>(j)].from_latent(z(j)));
        }
      }
    }
  });
  return out;
}

CiBounds confidence_intervals(const CopulaModel& model, const DataTable& table, const CiOptions& ci,
                              const ImputeOptions& options) {
  check_shape(model, table);
  if (!(ci.alpha > 0.0 && ci.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  const Index n = table.n_rows();
  const Index p = table.n_cols();
  const Eigen::MatrixXd blank = Eigen::MatrixXd::Constant(n, p, kMissing);
  CiBounds out{DataTable(blank, table.col_names()), DataTable(blank, table.col_names())};

  if (ci.kind == CiKind::analytic) {
    const double q = std_normal_quantile(1.0 - ci.alpha / 2.0);
    parallel_chunks(static_cast<std::size_t>(n), options.n_workers,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                      for (auto i = static_cast<Index>(begin); i < static_cast<Index>(end); ++i) {
                        const EncodedRow row = encode_row(model.marginals, table.values().row(i));
                        if (row.missing.empty()) continue;
                        const RowPosterior post = model_posterior(model, row, options.sweeps, i);
                        for (std::size_t r = 0; r < row.missing.size(); ++r) {
                          const Index j = row.missing[r];
                          const double sd = std::sqrt(std::max(0.0, post.missing_var(static_cast<Index>(r))));
                          const auto& m = model.marginals[static_cast<std::size_t>(j)];
                          out.lower.set(i, j, m.from_latent(post.cond_mean(j) - q * sd));
                          out.upper.set(i, j, m.from_latent(post.cond_mean(j) + q * sd));
                        }
                      }
                    });
    return out;
  }

  if (ci.num_samples < 2) throw std::invalid_argument("quantile intervals need at least 2 samples");
  const auto draws = impute_multiple(model, table, ci.num_samples, ci.seed, options);
  std::vector<double> cell(static_cast<std::size_t>(ci.num_samples));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (!table.missing(i, j)) continue;
      for (std::size_t d = 0; d < draws.size(); ++d) cell[d] = draws[d](i, j);
      out.lower.set(i, j, sample_quantile(cell, ci.alpha / 2.0));
      out.upper.set(i, j, sample_quantile(cell, 1.0 - ci.alpha / 2.0));
    }
  }
  return out;
}

}  // namespace gcopula
