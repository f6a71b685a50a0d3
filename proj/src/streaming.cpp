#include "gcopula/streaming.hpp"

#include "gcopula/copula_em.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gcopula {

void validate(const StreamConfig& config) {
  if (config.window_size < 2) throw std::invalid_argument("window size must be at least 2");
  if (!(config.const_stepsize > 0.0 && config.const_stepsize < 1.0)) {
    throw std::invalid_argument("constant step size must lie in (0, 1)");
  }
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(config.decay > 0.0 && config.decay <= 1.0)) throw std::invalid_argument("decay must lie in (0, 1]");
  if (config.sweeps < 1) throw std::invalid_argument("sweeps must be at least 1");
  if (config.n_workers < 1) throw std::invalid_argument("workers must be at least 1");
}

void StreamState::refit_column(Index j) {
  const auto ju = static_cast<std::size_t>(j);
  const std::vector<double> values(buffers_[ju].begin(), buffers_[ju].end());
  marginals_[ju] = Marginal::fit(values, types_[ju]);
  if (decay_weighted()) {
    std::vector<double> w = decayed_weights(values.size(), config_.decay);
    std::reverse(w.begin(), w.end());  // buffer runs oldest to newest
    weighted_[ju] = Marginal::fit(values, w, types_[ju]);
  }
}

CopulaModel StreamState::snapshot() const {
  CopulaModel model;
  model.corr = corr_;
  model.marginals = marginals_;
  model.col_names = col_names_;
  return model;
}

StreamState init_stream(const DataTable& first_rows, const StreamConfig& config) {
  validate(config);
  if (first_rows.n_rows() < 2) throw DataError("stream initialization needs at least 2 rows");
  const Index p = first_rows.n_cols();
  for (Index j = 0; j < p; ++j) {
    if (first_rows.observed_count(j) < 2) {
      throw DataError("column '" + first_rows.col_name(j) + "' has fewer than 2 observed values in the initialization rows");
    }
  }

  StreamState s;
  s.config_ = config;
  s.col_names_ = first_rows.col_names();
  if (config.types.empty()) {
    s.types_ = detect_variable_types(first_rows, config.min_ord_ratio);
  } else {
    if (static_cast<Index>(config.types.size()) != p) throw DataError("column type count mismatch");
    s.types_ = config.types;
  }

  s.buffers_.assign(static_cast<std::size_t>(p), {});
  for (Index i = 0; i < first_rows.n_rows(); ++i) {
    for (Index j = 0; j < p; ++j) {
      if (first_rows.missing(i, j)) continue;
      auto& buf = s.buffers_[static_cast<std::size_t>(j)];
      buf.push_back(first_rows(i, j));
      if (static_cast<Index>(buf.size()) > config.window_size) buf.pop_front();
    }
  }
  s.marginals_.resize(static_cast<std::size_t>(p));
  s.weighted_.resize(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) s.refit_column(j);

  FitConfig fit;
  fit.tol = config.init_tol;
  fit.max_iter = config.init_max_iter;
  fit.sweeps = config.sweeps;
  fit.n_workers = config.n_workers;
  fit.types = s.types_;
  s.corr_ = fit_with_marginals(first_rows, s.marginals_, fit).corr;
  return s;
}

std::vector<double> step(StreamState& state, const std::vector<double>& row,
                         const std::optional<std::vector<double>>& revealed) {
  const Index p = state.n_cols();
  if (static_cast<Index>(row.size()) != p) throw DataError("stream row has the wrong number of columns");
  if (revealed) {
    if (static_cast<Index>(revealed->size()) != p) throw DataError("revealed row has the wrong number of columns");
    for (Index j = 0; j < p; ++j) {
      const double x = row[static_cast<std::size_t>(j)];
      if (!is_missing(x) && (*revealed)[static_cast<std::size_t>(j)] != x) {
        throw DataError("revealed row disagrees with the input at column '" +
                        state.col_names_[static_cast<std::size_t>(j)] + "'");
      }
    }
  }

  const Eigen::Map<const Eigen::RowVectorXd> x(row.data(), p);
  const EncodedRow enc = encode_row(state.marginals_, x);
  const RowPosterior post = row_posterior(state.corr_, enc, state.config_.sweeps);
  std::vector<double> imputed = row;
  const auto& out_marg = state.output_marginals();
  for (Index j : enc.missing) {
    imputed[static_cast<std::size_t>(j)] = out_marg[static_cast<std::size_t>(j)].from_latent(post.cond_mean(j));
  }

  const std::vector<double>& source = revealed ? *revealed : row;
  for (Index j = 0; j < p; ++j) {
    const double v = source[static_cast<std::size_t>(j)];
    if (is_missing(v)) continue;
    auto& buf = state.buffers_[static_cast<std::size_t>(j)];
    buf.push_back(v);
    if (static_cast<Index>(buf.size()) > state.config_.window_size) buf.pop_front();
    state.refit_column(j);
  }
  const Eigen::Map<const Eigen::RowVectorXd> src(source.data(), p);
  EncodedRow ingest = encode_row(state.marginals_, src);
  if (!ingest.observed.empty()) state.batch_.push_back(std::move(ingest));

  if (static_cast<Index>(state.batch_.size()) >= state.config_.batch_size) {
    const EStepResult e = estep(state.corr_, state.batch_, state.config_.sweeps, state.config_.n_workers);
    const Eigen::MatrixXd hat = mstep(e.S, static_cast<double>(e.rows), pinned_columns(state.marginals_));
    const double eta = state.config_.const_stepsize;
    state.corr_ = (1.0 - eta) * state.corr_ + eta * hat;
    state.corr_.diagonal().setOnes();
    state.batch_.clear();
    ++state.updates_;
  }
  ++state.ticks_;
  return imputed;
}

}  // namespace gcopula
