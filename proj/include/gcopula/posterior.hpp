#pragma once

#include "gcopula/data_table.hpp"
#include "gcopula/normal.hpp"

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

namespace gcopula {

using Rng = std::mt19937_64;

/// Raised when a covariance block stays indefinite after the jitter ladder.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One data row in latent form: observed coordinates with their latent
/// intervals (points for exactly-known values) and the missing coordinates.
struct EncodedRow {
  std::vector<Index> observed;
  std::vector<LatentInterval> intervals;
  std::vector<Index> missing;
};

/// Cholesky factor of a symmetric positive-definite matrix. If the plain
/// factorization fails, 1e-6 is added to the diagonal and escalated x10 up
/// to 1e-2 before giving up.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

SpdFactor factor_spd(const Eigen::MatrixXd& a);

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<Index>& rows,
                          const std::vector<Index>& cols);

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Law of z_M given z_O = values for z ~ N(0, sigma).
ConditionalGaussian conditional_mvn(const Eigen::MatrixXd& sigma, const std::vector<Index>& observed,
                                    const Eigen::VectorXd& values, const std::vector<Index>& missing);

/// z_M = gain * z_O + chol * xi for xi ~ N(0, I).
struct DenseMissingLaw {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd chol;
};

/// Factor form z_M = W_M t + noise_sd * eps with t = gain * z_O + chol * xi.
struct FactorMissingLaw {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd chol;
  Eigen::MatrixXd loadings;
  double noise_sd = 0.0;
};

/// Approximate conditional law of one latent row given its observed cells.
struct RowPosterior {
  std::vector<Index> observed;
  std::vector<Index> missing;
  /// E[z_j | x_O] for every coordinate j.
  Eigen::VectorXd cond_mean;
  /// Var[z_j | x_O] for interval-valued observed coordinates; 0 elsewhere.
  Eigen::VectorXd cond_var;
  /// Conditional covariance of the missing block, including the spread
  /// propagated from interval-valued observations. Empty for factor models.
  Eigen::MatrixXd cond_cov_missing;
  /// Cov(z_M, z_O | x_O), |M| x |O|. Empty for factor models.
  Eigen::MatrixXd cross_cov;
  /// Var[z_m | z_O] with z_O held at its conditional mean, per missing m.
  Eigen::VectorXd missing_var;
  /// Untruncated conditional N(prior_mean, prior_var) of each interval
  /// coordinate at the last sweep; the truncated law samples from it.
  Eigen::VectorXd prior_mean;
  Eigen::VectorXd prior_var;
  /// Copula-density surrogate of log p(x_O).
  double loglik = 0.0;
  std::variant<DenseMissingLaw, FactorMissingLaw> law;
};

inline constexpr int kDefaultSweeps = 2;

/// Conditional moments of a latent row under correlation `sigma`. Rows with
/// only point observations are exact. Interval observations use a
/// coordinate-wise fixed point: each starts at its N(0,1) truncated mean, then
/// for `sweeps` passes in index order is replaced by the truncated moments
/// of its Gaussian conditional given the other observed coordinates at their
/// current means. Cross-covariances between interval coordinates are taken
/// as zero.
RowPosterior row_posterior(const Eigen::MatrixXd& sigma, const EncodedRow& row, int sweeps = kDefaultSweeps);

/// Draws from N(mu, var) restricted to the interval.
double sample_truncnorm(double mu, double var, const LatentInterval& interval, Rng& rng);

/// Draws z_M given a full latent vector for the observed coordinates
/// (ordered as posterior.observed).
Eigen::VectorXd draw_missing(const RowPosterior& posterior, const Eigen::VectorXd& z_observed, Rng& rng);

/// Lower Cholesky-like square root of a symmetric PSD matrix; tolerates
/// semidefinite input.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a);

}  // namespace gcopula
