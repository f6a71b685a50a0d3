#pragma once

#include "gcopula/copula_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gcopula {

struct ImputationResult {
  DataTable imputed;
  /// Row i holds E[z | x_O] of row i.
  Eigen::MatrixXd latent_means;
  /// Bounds at originally missing cells; observed cells are left missing.
  std::optional<DataTable> ci_lower;
  std::optional<DataTable> ci_upper;
};

struct ImputeOptions {
  int sweeps = kDefaultSweeps;
  int n_workers = 1;
};

/// Fills every missing cell with f_j(E[z_j | x_O]). Rows with no observed
/// cell get f_j(0).
ImputationResult impute_single(const CopulaModel& model, const DataTable& table, const ImputeOptions& options = {});

/// Same pathway for rows not seen during fitting; nothing is refit.
ImputationResult transform_out_of_sample(const CopulaModel& model, const DataTable& rows,
                                         const ImputeOptions& options = {});

/// `num` completed tables. Each row draws from its own generator seeded by
/// (seed, row index), so the result does not depend on worker count.
std::vector<DataTable> impute_multiple(const CopulaModel& model, const DataTable& table, int num, std::uint64_t seed,
                                       const ImputeOptions& options = {});

enum class CiKind { analytic, quantile };

inline constexpr int kDefaultCiSamples = 200;

struct CiOptions {
  double alpha = 0.05;
  CiKind kind = CiKind::analytic;
  int num_samples = kDefaultCiSamples;
  std::uint64_t seed = 0;
};

struct CiBounds {
  DataTable lower;
  DataTable upper;
};

/// Analytic: f_j(mu_j -+ q * sd_j) with q = Phi^-1(1 - alpha/2) and sd_j the
/// conditional sd given z_O at its mean. Quantile: empirical alpha/2 and
/// 1 - alpha/2 quantiles of num_samples multiple imputations.
CiBounds confidence_intervals(const CopulaModel& model, const DataTable& table, const CiOptions& ci = {},
                              const ImputeOptions& options = {});

/// Linear-interpolation sample quantile (the common "type 7" rule) of an
/// unsorted sample.
double sample_quantile(std::vector<double> values, double q);

}  // namespace gcopula
