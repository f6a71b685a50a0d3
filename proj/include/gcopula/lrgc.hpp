#pragma once

#include "gcopula/copula_model.hpp"

namespace gcopula {

/// Row posterior under Sigma = W W^T + sigma2 I computed through the k x k
/// system W_O^T W_O + sigma2 I. cond_cov_missing and cross_cov are left
/// empty; missing_var and the sampling law are filled.
RowPosterior low_rank_row_posterior(const LowRankParams& params, const EncodedRow& row,
                                    int sweeps = kDefaultSweeps);

/// Sufficient statistics of one E-step over the factor model. Per column j,
/// A[j] and b[j] sum E[t t^T] and E[z_j t] over rows observing j, and c[j]
/// sums E[z_j^2].
struct FactorStats {
  std::vector<Eigen::MatrixXd> A;
  Eigen::MatrixXd b;  // p x k
  Eigen::VectorXd c;
  Eigen::VectorXd count;
  double loglik = 0.0;
  Index rows = 0;
};

FactorStats factor_estep(const LowRankParams& params, const std::vector<EncodedRow>& rows, int sweeps = kDefaultSweeps,
                         int n_workers = 1);

/// Loadings and noise from the statistics, with each loading row rescaled
/// so that ||W_j||^2 + sigma2 = 1.
LowRankParams factor_mstep(const FactorStats& stats, const LowRankParams& previous);

/// ||Sigma(b) - Sigma(a)||_F / ||Sigma(a)||_F from k x k products only.
double low_rank_relative_change(const LowRankParams& a, const LowRankParams& b);

/// Starting point from the top-k subspace of the standardized, zero-filled
/// latent point matrix. sigma2 is floored at 0.01.
LowRankParams initial_low_rank(const std::vector<EncodedRow>& rows, Index p, Index rank, std::uint64_t seed = 0);

/// EM for the low-rank model. The returned model carries low_rank and leaves
/// corr empty.
CopulaModel fit_lrgc(const DataTable& table, Index rank, const FitConfig& config);

CopulaModel fit_lrgc_with_marginals(const DataTable& table, std::vector<Marginal> marginals, Index rank,
                                    const FitConfig& config);

}  // namespace gcopula
