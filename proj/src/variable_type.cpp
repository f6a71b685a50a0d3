#include "gcopula/variable_type.hpp"

#include <algorithm>
#include <map>

namespace gcopula {

std::string_view to_string(VarKind kind) {
  switch (kind) {
    case VarKind::continuous: return "continuous";
    case VarKind::ordinal: return "ordinal";
    case VarKind::lower_truncated: return "lower_truncated";
    case VarKind::upper_truncated: return "upper_truncated";
    case VarKind::twosided_truncated: return "twosided_truncated";
  }
  return "unknown";
}

std::optional<VarKind> parse_var_kind(std::string_view name) {
  for (VarKind k : {VarKind::continuous, VarKind::ordinal, VarKind::lower_truncated,
                    VarKind::upper_truncated, VarKind::twosided_truncated}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

// Largest relative frequency among the unique values in counts[first, last).
double mode_frequency(const std::vector<std::pair<double, Index>>& counts, std::size_t first,
                      std::size_t last) {
  Index total = 0;
  Index best = 0;
  for (std::size_t k = first; k < last; ++k) {
    total += counts[k].second;
    best = std::max(best, counts[k].second);
  }
  return total > 0 ? static_cast<double>(best) / static_cast<double>(total) : 1.0;
}

}  // namespace

VariableType detect_variable_type(std::vector<double> observed, double min_ord_ratio) {
  if (!(min_ord_ratio > 0.0 && min_ord_ratio < 1.0)) {
    throw std::invalid_argument("min_ord_ratio must lie in (0, 1)");
  }
  if (observed.empty()) throw DataError("column has no observed values");

  std::sort(observed.begin(), observed.end());
  std::vector<std::pair<double, Index>> counts;
  for (double v : observed) {
    if (!counts.empty() && counts.back().first == v) {
      ++counts.back().second;
    } else {
      counts.emplace_back(v, 1);
    }
  }
  const auto n = static_cast<double>(observed.size());
  const std::size_t u = counts.size();

  if (mode_frequency(counts, 0, u) < min_ord_ratio) return VariableType::continuous();
  if (u < 2) return VariableType::ordinal();

  const bool heavy_min = static_cast<double>(counts.front().second) / n >= min_ord_ratio;
  const bool heavy_max = static_cast<double>(counts.back().second) / n >= min_ord_ratio;

  // An empty remainder (binary columns) never counts as continuous.
  auto continuous_between = [&](std::size_t first, std::size_t last) {
    return last > first && mode_frequency(counts, first, last) < min_ord_ratio;
  };

  VariableType t = VariableType::ordinal();
  if (heavy_min && heavy_max) {
    if (continuous_between(1, u - 1)) {
      t.kind = VarKind::twosided_truncated;
      t.alpha = counts.front().first;
      t.beta = counts.back().first;
    }
  } else if (heavy_min) {
    if (continuous_between(1, u)) {
      t.kind = VarKind::lower_truncated;
      t.alpha = counts.front().first;
    }
  } else if (heavy_max) {
    if (continuous_between(0, u - 1)) {
      t.kind = VarKind::upper_truncated;
      t.beta = counts.back().first;
    }
  }
  return t;
}

std::vector<VariableType> detect_variable_types(const DataTable& table, double min_ord_ratio) {
  std::vector<VariableType> types;
  types.reserve(static_cast<std::size_t>(table.n_cols()));
  for (Index j = 0; j < table.n_cols(); ++j) {
    auto obs = table.observed(j);
    if (obs.empty()) throw DataError("column '" + table.col_name(j) + "' has no observed values");
    types.push_back(detect_variable_type(std::move(obs), min_ord_ratio));
  }
  return types;
}

}  // namespace gcopula
