#include "gcopula/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gcopula {

namespace {

struct WeightedSample {
  double value;
  double weight;
};

std::vector<WeightedSample> sorted_samples(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw std::invalid_argument("values and weights differ in length");
  std::vector<WeightedSample> s(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) {
      throw std::invalid_argument("weights must be finite and nonnegative");
    }
    s[k] = {values[k], weights[k]};
  }
  std::stable_sort(s.begin(), s.end(), [](const auto& l, const auto& r) { return l.value < r.value; });
  return s;
}

double total_weight(const std::vector<WeightedSample>& s) {
  double w = 0.0;
  for (const auto& x : s) w += x.weight;
  return w;
}

}  // namespace

EmpiricalDistribution::EmpiricalDistribution(std::span<const double> values, std::span<const double> weights) {
  const auto samples = sorted_samples(values, weights);
  if (samples.empty()) throw std::invalid_argument("empirical distribution needs at least one value");
  const double total = total_weight(samples);
  if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");

  n_ = samples.size();
  const double n = static_cast<double>(n_);
  const double scale = n / (n + 1.0);
  const double unit = scale / n;
  floor_ = 1.0 / (n + 1.0);

  probs_.reserve(2 * n_);
  values_.reserve(2 * n_);
  double cum = 0.0;
  double prev = 0.0;
  for (const auto& s : samples) {
    cum += s.weight;
    const double knot = cum / total * scale;
    const double mass = knot - prev;
    if (mass > unit * (1.0 + 1e-9)) {
      probs_.push_back(prev + unit);
      values_.push_back(s.value);
    }
    probs_.push_back(knot);
    values_.push_back(s.value);
    prev = knot;
  }
}

double EmpiricalDistribution::quantile(double u) const {
  if (u <= probs_.front()) return values_.front();
  if (u >= probs_.back()) return values_.back();
  const auto it = std::upper_bound(probs_.begin(), probs_.end(), u);
  const auto k = static_cast<std::size_t>(it - probs_.begin());
  const double p0 = probs_[k - 1];
  const double p1 = probs_[k];
  if (!(p1 > p0)) return values_[k];
  const double t = (u - p0) / (p1 - p0);
  return values_[k - 1] + t * (values_[k] - values_[k - 1]);
}

double EmpiricalDistribution::cdf(double x) const {
  if (x < values_.front()) return floor_;
  if (x >= values_.back()) return std::max(probs_.back(), floor_);
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  const auto k = static_cast<std::size_t>(it - values_.begin()) - 1;
  double p = probs_[k];
  if (values_[k] != x) {
    const double t = (x - values_[k]) / (values_[k + 1] - values_[k]);
    p = probs_[k] + t * (probs_[k + 1] - probs_[k]);
  }
  return std::max(p, floor_);
}

Marginal Marginal::fit(std::span<const double> observed, const VariableType& type) {
  const std::vector<double> ones(observed.size(), 1.0);
  return fit(observed, ones, type);
}

Marginal Marginal::fit(std::span<const double> observed, std::span<const double> weights, const VariableType& type) {
  if (observed.empty()) throw DataError("cannot fit a marginal without observed values");
  const auto samples = sorted_samples(observed, weights);
  const double total = total_weight(samples);
  if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");

  Marginal m;
  m.type_ = type;

  switch (type.kind) {
    case VarKind::continuous: {
      m.body_ = EmpiricalDistribution(observed, weights);
      break;
    }
    case VarKind::ordinal: {
      double cum = 0.0;
      for (const auto& s : samples) {
        if (m.levels_.empty() || m.levels_.back() != s.value) {
          m.levels_.push_back(s.value);
          m.masses_.push_back(0.0);
        }
        m.masses_.back() += s.weight / total;
      }
      for (std::size_t k = 0; k + 1 < m.levels_.size(); ++k) {
        cum += m.masses_[k];
        m.cuts_.push_back(std_normal_quantile(std::min(cum, 1.0)));
      }
      break;
    }
    case VarKind::lower_truncated:
    case VarKind::upper_truncated:
    case VarKind::twosided_truncated: {
      const bool below = type.truncated_below();
      const bool above = type.truncated_above();
      m.type_.alpha = below ? samples.front().value : -kInf;
      m.type_.beta = above ? samples.back().value : kInf;
      std::vector<double> inner;
      std::vector<double> inner_w;
      double w_alpha = 0.0;
      double w_beta = 0.0;
      for (const auto& s : samples) {
        if (below && s.value == m.type_.alpha) {
          w_alpha += s.weight;
        } else if (above && s.value == m.type_.beta) {
          w_beta += s.weight;
        } else {
          inner.push_back(s.value);
          inner_w.push_back(s.weight);
        }
      }
      m.p_alpha_ = w_alpha / total;
      m.p_beta_ = w_beta / total;
      m.z_alpha_ = below ? std_normal_quantile(m.p_alpha_) : -kInf;
      m.z_beta_ = above ? std_normal_quantile(1.0 - m.p_beta_) : kInf;
      double inner_total = 0.0;
      for (double w : inner_w) inner_total += w;
      if (!inner.empty() && inner_total > 0.0) m.body_ = EmpiricalDistribution(inner, inner_w);
      break;
    }
  }
  return m;
}

std::size_t Marginal::nearest_level(double x) const {
  const auto it = std::lower_bound(levels_.begin(), levels_.end(), x);
  if (it == levels_.begin()) return 0;
  if (it == levels_.end()) return levels_.size() - 1;
  const auto hi = static_cast<std::size_t>(it - levels_.begin());
  if (*it == x) return hi;
  return (x - levels_[hi - 1] <= levels_[hi] - x) ? hi - 1 : hi;
}

LatentInterval Marginal::to_latent_interval(double x) const {
  switch (type_.kind) {
    case VarKind::continuous:
      return LatentInterval::point(std_normal_quantile(body_.cdf(x)));
    case VarKind::ordinal: {
      const std::size_t k = nearest_level(x);
      return {k == 0 ? -kInf : cuts_[k - 1], k + 1 == levels_.size() ? kInf : cuts_[k]};
    }
    default: {
      if (type_.truncated_below() && x <= type_.alpha) return {-kInf, z_alpha_};
      if (type_.truncated_above() && x >= type_.beta) return {z_beta_, kInf};
      if (body_.empty()) {
        // No interior values: snap to the nearer boundary.
        if (!type_.truncated_above() || (type_.truncated_below() && x - type_.alpha <= type_.beta - x)) {
          return {-kInf, z_alpha_};
        }
        return {z_beta_, kInf};
      }
      const double inner = 1.0 - p_alpha_ - p_beta_;
      return LatentInterval::point(std_normal_quantile(p_alpha_ + inner * body_.cdf(x)));
    }
  }
}

double Marginal::from_latent(double z) const {
  switch (type_.kind) {
    case VarKind::continuous:
      return body_.quantile(std_normal_cdf(z));
    case VarKind::ordinal: {
      const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), z);
      return levels_[static_cast<std::size_t>(it - cuts_.begin())];
    }
    default: {
      if (type_.truncated_below() && z <= z_alpha_) return type_.alpha;
      if (type_.truncated_above() && z >= z_beta_) return type_.beta;
      if (body_.empty()) {
        const double u = std_normal_cdf(z);
        if (!type_.truncated_above()) return type_.alpha;
        if (!type_.truncated_below()) return type_.beta;
        return (u - p_alpha_ <= 1.0 - p_beta_ - u) ? type_.alpha : type_.beta;
      }
      const double inner = 1.0 - p_alpha_ - p_beta_;
      const double u = (std_normal_cdf(z) - p_alpha_) / inner;
      return body_.quantile(u);
    }
  }
}

std::vector<double> decayed_weights(std::size_t window, double decay) {
  if (window < 1) throw std::invalid_argument("window length must be at least 1");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must lie in (0, 1]");
  std::vector<double> w(window);
  double cur = 1.0;
  for (std::size_t t = 0; t < window; ++t) {
    cur *= decay;
    cur = std::max(cur, std::numeric_limits<double>::min());
    w[t] = cur;
  }
  return w;
}

}  // namespace gcopula
