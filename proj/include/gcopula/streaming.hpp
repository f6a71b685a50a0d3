#pragma once

#include "gcopula/copula_model.hpp"

#include <deque>
#include <optional>
#include <vector>

namespace gcopula {

struct StreamConfig {
  Index window_size = 200;
  double const_stepsize = 0.1;
  Index batch_size = 40;
  double decay = 1.0;
  int sweeps = kDefaultSweeps;
  int n_workers = 1;
  /// Types for the stream; empty means detect on the initialization block.
  std::vector<VariableType> types;
  double min_ord_ratio = kDefaultMinOrdRatio;
  /// Settings of the full EM run on the initialization block.
  double init_tol = 0.01;
  int init_max_iter = 50;
};

void validate(const StreamConfig& config);

/// Online model state. Memory is bounded by the window, the batch size and
/// the p x p correlation, independent of stream length.
class StreamState {
 public:
  StreamState() = default;

  const StreamConfig& config() const { return config_; }
  const Eigen::MatrixXd& corr() const { return corr_; }
  /// Unweighted marginals of the current window.
  const std::vector<Marginal>& marginals() const { return marginals_; }
  /// Marginals used to map imputations back; decay-weighted when decay < 1.
  const std::vector<Marginal>& output_marginals() const { return decay_weighted() ? weighted_ : marginals_; }
  const std::deque<double>& window(Index j) const { return buffers_[static_cast<std::size_t>(j)]; }
  std::size_t pending() const { return batch_.size(); }
  std::size_t updates() const { return updates_; }
  std::size_t ticks() const { return ticks_; }
  Index n_cols() const { return static_cast<Index>(buffers_.size()); }

  /// Model with the current window marginals and correlation, as used to
  /// impute the next row.
  CopulaModel snapshot() const;

 private:
  friend StreamState init_stream(const DataTable& first_rows, const StreamConfig& config);
  friend std::vector<double> step(StreamState& state, const std::vector<double>& row,
                                  const std::optional<std::vector<double>>& revealed);

  bool decay_weighted() const { return config_.decay < 1.0; }
  void refit_column(Index j);

  StreamConfig config_;
  std::vector<VariableType> types_;
  std::vector<std::deque<double>> buffers_;
  std::vector<Marginal> marginals_;
  std::vector<Marginal> weighted_;
  Eigen::MatrixXd corr_;
  std::vector<EncodedRow> batch_;
  std::vector<std::string> col_names_;
  std::size_t updates_ = 0;
  std::size_t ticks_ = 0;
};

/// Fits marginals on the last window_size rows of the block and runs a full
/// EM fit on the whole block to start the correlation. Each column needs at
/// least 2 observed values.
StreamState init_stream(const DataTable& first_rows, const StreamConfig& config);

/// Imputes the row's missing cells with the current model, then ingests the
/// revealed row (or the row itself) and updates the model once every
/// batch_size ingested rows. Returns the imputed row.
std::vector<double> step(StreamState& state, const std::vector<double>& row,
                         const std::optional<std::vector<double>>& revealed = std::nullopt);

}  // namespace gcopula
