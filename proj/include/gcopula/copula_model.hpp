#pragma once

#include "gcopula/data_table.hpp"
#include "gcopula/marginal.hpp"
#include "gcopula/posterior.hpp"
#include "gcopula/variable_type.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gcopula {

/// Factor parameterization Sigma = W W^T + sigma2 I.
struct LowRankParams {
  Eigen::MatrixXd W;
  double sigma2 = 1.0;

  Index rank() const { return W.cols(); }
  Index n_cols() const { return W.rows(); }
};

/// Dense p x p matrix W W^T + sigma2 I. Only meant for export and tests.
Eigen::MatrixXd implied_corr(const LowRankParams& params);

struct TraceEntry {
  int iteration = 0;
  double change = 0.0;
  double loglik = 0.0;
};

struct FitTrace {
  std::vector<TraceEntry> entries;
  /// Likelihood at the starting value, before the first M-step.
  double initial_loglik = 0.0;
  bool converged = false;
  /// Rows consumed by E-steps over the whole fit.
  std::size_t rows_processed = 0;
  std::size_t batches = 0;
  /// Rows with no observed cell; they take no part in fitting.
  std::vector<Index> excluded_rows;
};

struct CopulaModel {
  Eigen::MatrixXd corr;
  std::vector<Marginal> marginals;
  FitTrace trace;
  std::optional<LowRankParams> low_rank;
  std::vector<std::string> col_names;

  Index n_cols() const { return static_cast<Index>(marginals.size()); }
};

enum class TrainingMode { standard, minibatch_offline };

/// Step size t -> eta_t for mini-batch blending, t starting at 1.
using StepSize = std::function<double(int)>;

StepSize default_stepsize(double c = 5.0);

struct FitConfig {
  double tol = 0.01;
  int max_iter = 50;
  TrainingMode mode = TrainingMode::standard;
  Index batch_size = 100;
  int num_pass = 2;
  StepSize stepsize = default_stepsize();
  std::uint64_t seed = 0;
  int n_workers = 1;
  int sweeps = kDefaultSweeps;
  /// Per-column types; empty means detect with min_ord_ratio.
  std::vector<VariableType> types;
  double min_ord_ratio = kDefaultMinOrdRatio;
  /// Receives one line per iteration when set.
  std::ostream* verbose = nullptr;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const FitConfig& config);

/// Uses config.types when given (checked against the column count), else
/// detects them.
std::vector<VariableType> resolve_types(const DataTable& table, const FitConfig& config);

std::vector<Marginal> fit_marginals(const DataTable& table, const std::vector<VariableType>& types);

/// Latent encoding of one row of observed-space values (NaN = missing).
EncodedRow encode_row(const std::vector<Marginal>& marginals, const Eigen::Ref<const Eigen::RowVectorXd>& row);

std::vector<EncodedRow> encode_table(const std::vector<Marginal>& marginals, const DataTable& table);

/// Columns whose latent coordinate is held independent of the rest.
std::vector<Index> pinned_columns(const std::vector<Marginal>& marginals);

/// Row posterior under either parameterization of the model.
RowPosterior model_posterior(const CopulaModel& model, const EncodedRow& row, int sweeps = kDefaultSweeps);

/// As above; a singular covariance block is reported with the 1-based row
/// number `row_index + 1`.
RowPosterior model_posterior(const CopulaModel& model, const EncodedRow& row, int sweeps, Index row_index);

}  // namespace gcopula
