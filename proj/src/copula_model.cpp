#include "gcopula/copula_model.hpp"

#include "gcopula/lrgc.hpp"

#include <stdexcept>
#include <string>

namespace gcopula {

Eigen::MatrixXd implied_corr(const LowRankParams& params) {
  Eigen::MatrixXd out = params.W * params.W.transpose();
  out.diagonal().array() += params.sigma2;
  return out;
}

StepSize default_stepsize(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("stepsize constant c must be positive");
  return [c](int t) { return c / (c + static_cast<double>(t)); };
}

void validate(const FitConfig& config) {
  if (!(config.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (config.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (config.num_pass < 1) throw std::invalid_argument("num_pass must be at least 1");
  if (config.n_workers < 1) throw std::invalid_argument("n_workers must be at least 1");
  if (config.sweeps < 1) throw std::invalid_argument("sweeps must be at least 1");
  if (!(config.min_ord_ratio > 0.0 && config.min_ord_ratio < 1.0)) {
    throw std::invalid_argument("min_ord_ratio must lie in (0, 1)");
  }
  if (!config.stepsize) throw std::invalid_argument("stepsize function is empty");
}

std::vector<VariableType> resolve_types(const DataTable& table, const FitConfig& config) {
  if (config.types.empty()) return detect_variable_types(table, config.min_ord_ratio);
  if (static_cast<Index>(config.types.size()) != table.n_cols()) {
    throw DataError("got " + std::to_string(config.types.size()) + " column types for " +
                    std::to_string(table.n_cols()) + " columns");
  }
  return config.types;
}

std::vector<Marginal> fit_marginals(const DataTable& table, const std::vector<VariableType>& types) {
  if (static_cast<Index>(types.size()) != table.n_cols()) throw DataError("column type count mismatch");
  std::vector<Marginal> out;
  out.reserve(types.size());
  for (Index j = 0; j < table.n_cols(); ++j) {
    const auto obs = table.observed(j);
    if (obs.empty()) throw DataError("column '" + table.col_name(j) + "' has no observed values");
    out.push_back(Marginal::fit(obs, types[static_cast<std::size_t>(j)]));
  }
  return out;
}

EncodedRow encode_row(const std::vector<Marginal>& marginals, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != static_cast<Index>(marginals.size())) throw DataError("row length does not match model");
  EncodedRow out;
  for (Index j = 0; j < row.size(); ++j) {
    if (is_missing(row(j))) {
      out.missing.push_back(j);
    } else {
      out.observed.push_back(j);
      out.intervals.push_back(marginals[static_cast<std::size_t>(j)].to_latent_interval(row(j)));
    }
  }
  return out;
}

std::vector<EncodedRow> encode_table(const std::vector<Marginal>& marginals, const DataTable& table) {
  std::vector<EncodedRow> out;
  out.reserve(static_cast<std::size_t>(table.n_rows()));
  for (Index i = 0; i < table.n_rows(); ++i) out.push_back(encode_row(marginals, table.values().row(i)));
  return out;
}

std::vector<Index> pinned_columns(const std::vector<Marginal>& marginals) {
  std::vector<Index> out;
  for (std::size_t j = 0; j < marginals.size(); ++j) {
    if (marginals[j].single_level()) out.push_back(static_cast<Index>(j));
  }
  return out;
}

RowPosterior model_posterior(const CopulaModel& model, const EncodedRow& row, int sweeps) {
  if (model.low_rank) return low_rank_row_posterior(*model.low_rank, row, sweeps);
  return row_posterior(model.corr, row, sweeps);
}

RowPosterior model_posterior(const CopulaModel& model, const EncodedRow& row, int sweeps, Index row_index) {
  try {
    return model_posterior(model, row, sweeps);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError("row " + std::to_string(row_index + 1) + ": " + e.what());
  }
}

}  // namespace gcopula
