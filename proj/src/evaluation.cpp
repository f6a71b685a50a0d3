#include "gcopula/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace gcopula {

namespace {

void check_same_shape(const DataTable& a, const DataTable& b) {
  if (a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols()) throw DataError("tables differ in shape");
}

bool evaluation_cell(const DataTable& truth, const DataTable& masked, Index i, Index j) {
  return masked.missing(i, j) && !truth.missing(i, j);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DataTable mask_mcar(const DataTable& table, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("mask fraction must lie in (0, 1)");
  std::vector<std::pair<Index, Index>> cells;
  for (Index j = 0; j < table.n_cols(); ++j) {
    for (Index i = 0; i < table.n_rows(); ++i) {
      if (!table.missing(i, j)) cells.emplace_back(i, j);
    }
  }
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size())));
  Rng rng(seed);
  std::shuffle(cells.begin(), cells.end(), rng);

  std::vector<Index> left(static_cast<std::size_t>(table.n_cols()));
  for (Index j = 0; j < table.n_cols(); ++j) left[static_cast<std::size_t>(j)] = table.observed_count(j);

  DataTable out = table;
  std::size_t masked = 0;
  for (const auto& [i, j] : cells) {
    if (masked == target) break;
    auto& l = left[static_cast<std::size_t>(j)];
    if (l <= 1) continue;
    out.set_missing(i, j);
    --l;
    ++masked;
  }
  if (masked < target) throw DataError("mask fraction would empty a column");
  return out;
}

std::vector<double> smae(const DataTable& imputed, const DataTable& truth, const DataTable& masked) {
  check_same_shape(imputed, truth);
  check_same_shape(imputed, masked);
  std::vector<double> out(static_cast<std::size_t>(truth.n_cols()), kMissing);
  for (Index j = 0; j < truth.n_cols(); ++j) {
    const auto obs = masked.observed(j);
    if (obs.empty()) continue;
    const double med = median(obs);
    double err = 0.0;
    double base = 0.0;
    Index cells = 0;
    for (Index i = 0; i < truth.n_rows(); ++i) {
      if (!evaluation_cell(truth, masked, i, j)) continue;
      err += std::abs(imputed(i, j) - truth(i, j));
      base += std::abs(med - truth(i, j));
      ++cells;
    }
    if (cells > 0 && base > 0.0) out[static_cast<std::size_t>(j)] = err / base;
  }
  return out;
}

double mae(const DataTable& imputed, const DataTable& truth, const DataTable& masked) {
  check_same_shape(imputed, truth);
  check_same_shape(imputed, masked);
  double err = 0.0;
  Index cells = 0;
  for (Index j = 0; j < truth.n_cols(); ++j) {
    for (Index i = 0; i < truth.n_rows(); ++i) {
      if (!evaluation_cell(truth, masked, i, j)) continue;
      err += std::abs(imputed(i, j) - truth(i, j));
      ++cells;
    }
  }
  return cells > 0 ? err / static_cast<double>(cells) : kMissing;
}

double mean_defined(const std::vector<double>& scores) {
  double sum = 0.0;
  int count = 0;
  for (double s : scores) {
    if (is_missing(s)) continue;
    sum += s;
    ++count;
  }
  return count > 0 ? sum / count : kMissing;
}

double coverage(const DataTable& lower, const DataTable& upper, const DataTable& truth, const DataTable& masked) {
  check_same_shape(lower, truth);
  check_same_shape(upper, truth);
  check_same_shape(masked, truth);
  Index hit = 0;
  Index cells = 0;
  for (Index i = 0; i < truth.n_rows(); ++i) {
    for (Index j = 0; j < truth.n_cols(); ++j) {
      if (!evaluation_cell(truth, masked, i, j)) continue;
      ++cells;
      if (lower(i, j) <= truth(i, j) && truth(i, j) <= upper(i, j)) ++hit;
    }
  }
  return cells > 0 ? static_cast<double>(hit) / static_cast<double>(cells) : kMissing;
}

MarginalSpec MarginalSpec::continuous(std::function<double(double)> quantile) {
  MarginalSpec s;
  s.kind_ = Kind::continuous;
  s.quantile_ = std::move(quantile);
  return s;
}

MarginalSpec MarginalSpec::ordinal_masses(std::vector<double> levels, const std::vector<double>& masses) {
  if (levels.size() != masses.size() || levels.empty()) throw std::invalid_argument("levels and masses differ");
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  std::vector<double> cuts;
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < masses.size(); ++k) {
    if (!(masses[k] > 0.0)) throw std::invalid_argument("ordinal masses must be positive");
    cum += masses[k] / total;
    cuts.push_back(std_normal_quantile(std::min(cum, 1.0)));
  }
  return ordinal_cutpoints(std::move(levels), std::move(cuts));
}

MarginalSpec MarginalSpec::ordinal_cutpoints(std::vector<double> levels, std::vector<double> cuts) {
  if (cuts.size() + 1 != levels.size()) throw std::invalid_argument("need one cutpoint fewer than levels");
  if (!std::is_sorted(cuts.begin(), cuts.end())) throw std::invalid_argument("cutpoints must be increasing");
  MarginalSpec s;
  s.kind_ = Kind::ordinal;
  s.levels_ = std::move(levels);
  s.cuts_ = std::move(cuts);
  return s;
}

MarginalSpec MarginalSpec::truncated(double lower, double upper, std::function<double(double)> quantile) {
  if (!(lower < upper)) throw std::invalid_argument("truncation bounds must satisfy lower < upper");
  MarginalSpec s;
  s.kind_ = Kind::truncated;
  s.lower_ = lower;
  s.upper_ = upper;
  s.quantile_ = std::move(quantile);
  return s;
}

double MarginalSpec::operator()(double z) const {
  switch (kind_) {
    case Kind::continuous: return quantile_(std_normal_cdf(z));
    case Kind::ordinal: {
      const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), z);
      return levels_[static_cast<std::size_t>(it - cuts_.begin())];
    }
    case Kind::truncated: return std::clamp(quantile_(std_normal_cdf(z)), lower_, upper_);
  }
  return kMissing;
}

Eigen::MatrixXd sample_latent(Index n, const std::variant<Eigen::MatrixXd, LowRankParams>& dependence,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Index rows, Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    }
    return m;
  };

  if (const auto* sigma = std::get_if<Eigen::MatrixXd>(&dependence)) {
    const Index p = sigma->rows();
    if (sigma->cols() != p) throw std::invalid_argument("correlation matrix must be square");
    if ((*sigma - sigma->transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("correlation matrix must be symmetric");
    }
    if ((sigma->diagonal().array() - 1.0).abs().maxCoeff() > 1e-8) {
      throw std::invalid_argument("correlation matrix must have unit diagonal");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*sigma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10) throw std::invalid_argument("correlation matrix is not positive semidefinite");
    const Eigen::MatrixXd root = psd_sqrt(*sigma);
    return draw(n, p) * root.transpose();
  }
  const auto& lr = std::get<LowRankParams>(dependence);
  if (!(lr.sigma2 > 0.0)) throw std::invalid_argument("noise variance must be positive");
  const Eigen::MatrixXd t = draw(n, lr.rank());
  const Eigen::MatrixXd eps = draw(n, lr.n_cols());
  return t * lr.W.transpose() + std::sqrt(lr.sigma2) * eps;
}

DataTable sample_gc(Index n, const std::vector<MarginalSpec>& specs,
                    const std::variant<Eigen::MatrixXd, LowRankParams>& dependence, std::uint64_t seed) {
  const Eigen::MatrixXd z = sample_latent(n, dependence, seed);
  if (static_cast<Index>(specs.size()) != z.cols()) throw std::invalid_argument("one marginal spec per column");
  Eigen::MatrixXd x(n, z.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < z.cols(); ++j) x(i, j) = specs[static_cast<std::size_t>(j)](z(i, j));
  }
  return DataTable(std::move(x));
}

}  // namespace gcopula
