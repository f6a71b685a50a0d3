#pragma once

#include "gcopula/copula_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gcopula {

struct EStepResult {
  /// Sum over rows of E[z z^T | x_O].
  Eigen::MatrixXd S;
  /// Sum over rows of E[z | x_O].
  Eigen::VectorXd m;
  /// Sum over rows of the per-row log-likelihood surrogate.
  double loglik = 0.0;
  Index rows = 0;
  /// Conditional means, one row per input row; filled when requested.
  Eigen::MatrixXd latent_means;
};

/// Expected latent second moments of `rows` under `sigma`. Partial sums are
/// formed over contiguous row chunks (one per worker) and added in chunk
/// order.
EStepResult estep(const Eigen::MatrixXd& sigma, const std::vector<EncodedRow>& rows, int sweeps = kDefaultSweeps,
                  int n_workers = 1, bool keep_means = false);

/// Adds one row's expected outer product to the lower triangle of S.
void accumulate_second_moment(const RowPosterior& post, Eigen::MatrixXd& S);

/// Correlation matrix of S / n. Columns in `pinned` get identity rows and
/// columns. A negative eigenvalue triggers projection to the PSD cone.
Eigen::MatrixXd mstep(const Eigen::MatrixXd& S, double n, const std::vector<Index>& pinned = {});

/// Clips eigenvalues at `floor` and rescales back to unit diagonal.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a, double floor);

/// ||b - a||_F / ||a||_F.
double relative_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Pairwise-complete correlation of latent points (interval cells at their
/// truncated N(0,1) means), projected with eigenvalue floor 1e-4. Identity
/// when some pair of columns has fewer than 2 joint observations.
Eigen::MatrixXd initial_corr(const std::vector<EncodedRow>& rows, Index p, const std::vector<Index>& pinned = {});

/// Average log-likelihood surrogate of the rows under the model.
double approx_loglik(const CopulaModel& model, const std::vector<EncodedRow>& rows, int sweeps = kDefaultSweeps,
                     int n_workers = 1);

/// Full-batch EM. Types and marginals come from the table.
CopulaModel fit_standard(const DataTable& table, const FitConfig& config);

/// Full-batch EM with the marginals supplied by the caller.
CopulaModel fit_with_marginals(const DataTable& table, std::vector<Marginal> marginals, const FitConfig& config);

/// Shuffled mini-batches blended with a decreasing step size, num_pass
/// passes over the data.
CopulaModel fit_minibatch_offline(const DataTable& table, const FitConfig& config);

/// Dispatches on config.mode.
CopulaModel fit_copula(const DataTable& table, const FitConfig& config);

}  // namespace gcopula
