#pragma once

#include "gcopula/data_table.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gcopula {

enum class VarKind {
  continuous,
  ordinal,
  lower_truncated,
  upper_truncated,
  twosided_truncated,
};

/// Per-column type tag. Truncated kinds carry the truncation point(s) seen
/// in the data; the other bound is infinite.
struct VariableType {
  VarKind kind = VarKind::continuous;
  double alpha = -std::numeric_limits<double>::infinity();
  double beta = std::numeric_limits<double>::infinity();

  static VariableType continuous() { return {VarKind::continuous}; }
  static VariableType ordinal() { return {VarKind::ordinal}; }

  bool truncated_below() const {
    return kind == VarKind::lower_truncated || kind == VarKind::twosided_truncated;
  }
  bool truncated_above() const {
    return kind == VarKind::upper_truncated || kind == VarKind::twosided_truncated;
  }
  bool is_truncated() const { return truncated_below() || truncated_above(); }

  friend bool operator==(const VariableType&, const VariableType&) = default;
};

std::string_view to_string(VarKind kind);
std::optional<VarKind> parse_var_kind(std::string_view name);

inline constexpr double kDefaultMinOrdRatio = 0.1;

/// Classifies each column from the frequencies of its observed unique values:
/// continuous when the mode frequency is below `min_ord_ratio`; truncated when
/// the minimum and/or maximum carries at least that frequency and the rest,
/// renormalized, passes the continuous test; ordinal otherwise.
std::vector<VariableType> detect_variable_types(const DataTable& table,
                                                double min_ord_ratio = kDefaultMinOrdRatio);

VariableType detect_variable_type(std::vector<double> observed, double min_ord_ratio);

}  // namespace gcopula
