#include "gcopula/cli.hpp"

#include "gcopula/copula_em.hpp"
#include "gcopula/evaluation.hpp"
#include "gcopula/imputer.hpp"
#include "gcopula/lrgc.hpp"
#include "gcopula/streaming.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gcopula {

namespace {

// Thrown for bad flag combinations found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  std::string mode = "standard";
  double tol = 0.01;
  int max_iter = 50;
  Index batch_size = 100;
  int num_pass = 2;
  double stepsize_c = 5.0;
  Index rank = 0;
  double min_ord_ratio = kDefaultMinOrdRatio;
  std::string types;
  std::uint64_t seed = 0;
  int workers = 1;
  int sweeps = kDefaultSweeps;
  bool verbose = false;
};

struct StreamFlags {
  Index window_size = 200;
  double const_stepsize = 0.1;
  Index batch_size = 40;
  double decay = 1.0;
  Index n_train = 25;
};

struct ImputeFlags {
  std::string input;
  std::string output = "-";
  std::string ci = "none";
  double alpha = 0.05;
  int num_samples = kDefaultCiSamples;
  int multiple = 0;
  std::string corr_out;
};

struct EvaluateFlags {
  std::string truth;
  std::string masked;
  std::string imputed;
  std::string lower;
  std::string upper;
};

struct StreamIo {
  std::string input = "-";
  std::string output = "-";
  std::string truth;
};

// `offline` adds the flags that only make sense when fitting a whole table.
void add_model_flags(CLI::App* app, ModelFlags& f, bool offline) {
  if (offline) {
    app->add_option("--mode", f.mode, "Training mode")
        ->check(CLI::IsMember({"standard", "minibatch-offline", "minibatch-online"}));
    app->add_option("--batch-size", f.batch_size, "Rows per mini-batch (minibatch-offline)");
    app->add_option("--num-pass", f.num_pass, "Passes over the data (minibatch-offline)");
    app->add_option("--stepsize-c", f.stepsize_c, "c in the step size c/(c+t)");
    app->add_option("--rank", f.rank, "Rank of the low-rank model; 0 fits a full correlation");
  }
  app->add_option("--tol", f.tol, "Relative Frobenius change that stops EM");
  app->add_option("--max-iter", f.max_iter, "Maximum EM iterations");
  app->add_option("--min-ord-ratio", f.min_ord_ratio, "Mode frequency threshold for type detection");
  app->add_option("--types", f.types,
                  "Comma-separated per-column types: auto, continuous, ordinal, lower_truncated, "
                  "upper_truncated, twosided_truncated");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--workers", f.workers, "Worker threads for E-steps and imputation");
  app->add_option("--sweeps", f.sweeps, "Coordinate sweeps per row in the E-step");
  app->add_flag("--verbose", f.verbose, "Print one line per iteration to stderr");
}

void add_stream_flags(CLI::App* app, StreamFlags& f, bool with_batch) {
  app->add_option("--window-size", f.window_size, "Values kept per column for the marginals");
  app->add_option("--const-stepsize", f.const_stepsize, "Constant step size of the online update");
  if (with_batch) app->add_option("--batch-size", f.batch_size, "Rows per online update");
  app->add_option("--decay", f.decay, "Decay d in (0, 1] of the quantile weights");
  app->add_option("--n-train", f.n_train, "Rows used to initialize the stream");
}

std::vector<VariableType> parse_types(const std::string& spec, const DataTable& table, double min_ord_ratio) {
  if (spec.empty()) return {};
  std::vector<std::string> names;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    names.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  if (static_cast<Index>(names.size()) != table.n_cols()) {
    throw UsageError("--types lists " + std::to_string(names.size()) + " entries for " +
                     std::to_string(table.n_cols()) + " columns");
  }
  std::vector<VariableType> types;
  bool any_auto = false;
  for (const auto& n : names) any_auto = any_auto || n.empty() || n == "auto";
  if (any_auto) types = detect_variable_types(table, min_ord_ratio);
  types.resize(names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j].empty() || names[j] == "auto") continue;
    const auto kind = parse_var_kind(names[j]);
    if (!kind) {
      throw UsageError("unknown type '" + names[j] + "' for column '" + table.col_name(static_cast<Index>(j)) + "'");
    }
    types[j] = VariableType{*kind};
  }
  return types;
}

FitConfig make_fit_config(const ModelFlags& f, std::ostream& err) {
  FitConfig c;
  c.tol = f.tol;
  c.max_iter = f.max_iter;
  c.mode = f.mode == "minibatch-offline" ? TrainingMode::minibatch_offline : TrainingMode::standard;
  c.batch_size = f.batch_size;
  c.num_pass = f.num_pass;
  if (!(f.stepsize_c > 0.0)) throw UsageError("--stepsize-c must be positive");
  c.stepsize = default_stepsize(f.stepsize_c);
  c.seed = f.seed;
  c.n_workers = f.workers;
  c.sweeps = f.sweeps;
  c.min_ord_ratio = f.min_ord_ratio;
  c.verbose = f.verbose ? &err : nullptr;
  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

StreamConfig make_stream_config(const StreamFlags& s, const ModelFlags& m) {
  StreamConfig c;
  c.window_size = s.window_size;
  c.const_stepsize = s.const_stepsize;
  c.batch_size = s.batch_size;
  c.decay = s.decay;
  c.sweeps = m.sweeps;
  c.n_workers = m.workers;
  c.min_ord_ratio = m.min_ord_ratio;
  c.init_tol = m.tol;
  c.init_max_iter = m.max_iter;
  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (s.n_train < 2) throw UsageError("--n-train must be at least 2");
  return c;
}

std::string sibling_path(const std::string& output, const std::string& suffix) {
  const std::filesystem::path p(output);
  const std::string ext = p.has_extension() ? p.extension().string() : std::string(".csv");
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

DataTable read_input(const std::string& path, std::istream& in) {
  if (path == "-") return read_csv(in);
  return read_csv_file(path);
}

void write_output(const std::string& path, const DataTable& table, std::ostream& out) {
  if (path == "-") {
    write_csv(out, table);
  } else {
    write_csv_file(path, table);
  }
}

// Fits per the flags and returns the model. Online mode on a whole table
// walks the rows as a stream and returns the final state as a model.
CopulaModel fit_from_flags(const DataTable& table, const ModelFlags& mf, const StreamFlags& sf, FitConfig config) {
  if (mf.mode == "minibatch-online") {
    StreamConfig sc = make_stream_config(sf, mf);
    sc.types = config.types;
    const Index n_init = std::min(sf.n_train, table.n_rows());
    StreamState state = init_stream(table.row_range(0, n_init), sc);
    for (Index i = n_init; i < table.n_rows(); ++i) {
      const Eigen::RowVectorXd r = table.values().row(i);
      step(state, std::vector<double>(r.data(), r.data() + r.size()));
    }
    CopulaModel model = state.snapshot();
    model.col_names = table.col_names();
    return model;
  }
  if (mf.rank > 0) return fit_lrgc(table, mf.rank, config);
  return fit_copula(table, config);
}

int cmd_impute(const ImputeFlags& f, const ModelFlags& mf, const StreamFlags& sf, std::istream& in,
               std::ostream& out, std::ostream& err) {
  DataTable table;
  try {
    table = read_input(f.input, in);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  FitConfig config;
  try {
    config = make_fit_config(mf, err);
    if (f.alpha <= 0.0 || f.alpha >= 1.0) throw UsageError("--alpha must lie in (0, 1)");
    if (f.multiple < 0) throw UsageError("--multiple must be nonnegative");
    if (f.num_samples < 2) throw UsageError("--num-samples must be at least 2");
    if (f.output == "-" && (f.ci != "none" || f.multiple > 0)) {
      throw UsageError("--ci and --multiple need --output to name a file");
    }
    if (mf.mode == "minibatch-offline" && mf.batch_size < table.n_cols()) {
      throw UsageError("batch size must be ≥ p (got " + std::to_string(mf.batch_size) + " for p=" +
                       std::to_string(table.n_cols()) + "); use --rank for the low-rank model");
    }
    if (mf.rank < 0 || (mf.rank > 0 && mf.rank >= table.n_cols())) {
      throw UsageError("--rank must satisfy 0 < k < p (p=" + std::to_string(table.n_cols()) + ")");
    }
    if (mf.rank > 0 && mf.mode != "standard") throw UsageError("--rank supports only --mode standard");
    config.types = parse_types(mf.types, table, mf.min_ord_ratio);
    if (mf.mode == "minibatch-online") make_stream_config(sf, mf);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  try {
    const CopulaModel model = fit_from_flags(table, mf, sf, config);
    ImputeOptions opts;
    opts.sweeps = mf.sweeps;
    opts.n_workers = mf.workers;
    const ImputationResult res = impute_single(model, table, opts);
    write_output(f.output, res.imputed, out);

    if (f.ci != "none") {
      CiOptions ci;
      ci.alpha = f.alpha;
      ci.kind = f.ci == "quantile" ? CiKind::quantile : CiKind::analytic;
      ci.num_samples = f.num_samples;
      ci.seed = mf.seed;
      const CiBounds b = confidence_intervals(model, table, ci, opts);
      write_csv_file(sibling_path(f.output, "_lower"), b.lower);
      write_csv_file(sibling_path(f.output, "_upper"), b.upper);
    }
    if (f.multiple > 0) {
      const auto draws = impute_multiple(model, table, f.multiple, mf.seed, opts);
      for (std::size_t d = 0; d < draws.size(); ++d) {
        write_csv_file(sibling_path(f.output, "_imp" + std::to_string(d + 1)), draws[d]);
      }
    }
    if (!f.corr_out.empty()) {
      const Eigen::MatrixXd corr = model.low_rank ? implied_corr(*model.low_rank) : model.corr;
      write_csv_file(f.corr_out, DataTable(corr, table.col_names()));
    }
  } catch (const std::exception& e) {
    err << "error: fit failed: " << e.what() << '\n';
    return kExitFit;
  }
  return kExitOk;
}

void write_stream_row(std::ostream& out, const std::vector<double>& row, bool warmup) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j > 0) out << ',';
    out << format_value(row[j]);
  }
  out << ',' << (warmup ? 1 : 0) << '\n';
  out.flush();
}

int cmd_stream(const StreamIo& io, const ModelFlags& mf, const StreamFlags& sf, std::istream& in,
               std::ostream& out, std::ostream& err) {
  StreamConfig config;
  try {
    config = make_stream_config(sf, mf);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::unique_ptr<std::ifstream> file_in;
  std::istream* src = &in;
  if (io.input != "-") {
    file_in = std::make_unique<std::ifstream>(io.input);
    if (!*file_in) {
      err << "error: cannot open '" << io.input << "'\n";
      return kExitParse;
    }
    src = file_in.get();
  }
  std::unique_ptr<std::ofstream> file_out;
  std::ostream* dst = &out;
  if (io.output != "-") {
    file_out = std::make_unique<std::ofstream>(io.output);
    if (!*file_out) {
      err << "error: cannot write '" << io.output << "'\n";
      return kExitUsage;
    }
    dst = file_out.get();
  }
  std::unique_ptr<std::ifstream> truth;
  if (!io.truth.empty()) {
    truth = std::make_unique<std::ifstream>(io.truth);
    if (!*truth) {
      err << "error: cannot open '" << io.truth << "'\n";
      return kExitParse;
    }
  }

  std::string line;
  std::vector<std::string> header;
  Index line_no = 0;
  Index truth_line_no = 0;
  auto next_line = [](std::istream& s, std::string& l, Index& no) {
    while (std::getline(s, l)) {
      ++no;
      if (!l.empty() && l.back() == '\r') l.pop_back();
      if (!l.empty()) return true;
    }
    return false;
  };

  try {
    if (!next_line(*src, line, line_no)) throw DataError("empty input: header row required");
    header = split_csv_line(line);
    const auto p = static_cast<Index>(header.size());
    if (truth) {
      std::string tl;
      if (!next_line(*truth, tl, truth_line_no)) throw DataError("truth file is empty");
      if (static_cast<Index>(split_csv_line(tl).size()) != p) throw DataError("truth file has a different column count");
    }
    auto next_truth = [&]() -> std::optional<std::vector<double>> {
      if (!truth) return std::nullopt;
      std::string tl;
      if (!next_line(*truth, tl, truth_line_no)) throw DataError("truth file ended early at line " + std::to_string(truth_line_no));
      return parse_csv_row(tl, p, truth_line_no);
    };

    std::vector<std::vector<double>> warm;
    std::vector<std::optional<std::vector<double>>> warm_truth;
    while (static_cast<Index>(warm.size()) < sf.n_train && next_line(*src, line, line_no)) {
      warm.push_back(parse_csv_row(line, p, line_no));
      warm_truth.push_back(next_truth());
    }
    Eigen::MatrixXd block(static_cast<Index>(warm.size()), p);
    for (std::size_t i = 0; i < warm.size(); ++i) {
      const auto& r = warm_truth[i] ? *warm_truth[i] : warm[i];
      for (Index j = 0; j < p; ++j) block(static_cast<Index>(i), j) = r[static_cast<std::size_t>(j)];
    }
    const DataTable init_block(block, header);
    config.types = parse_types(mf.types, init_block, mf.min_ord_ratio);

    StreamState state;
    try {
      state = init_stream(init_block, config);
    } catch (const std::exception& e) {
      err << "error: stream initialization failed: " << e.what() << '\n';
      return kExitFit;
    }

    for (std::size_t j = 0; j < header.size(); ++j) *dst << (j > 0 ? "," : "") << header[j];
    *dst << ",warmup\n";
    for (const auto& r : warm) write_stream_row(*dst, r, true);

    while (next_line(*src, line, line_no)) {
      const auto row = parse_csv_row(line, p, line_no);
      const auto revealed = next_truth();
      write_stream_row(*dst, step(state, row, revealed), false);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    err << "error: stream update failed: " << e.what() << '\n';
    return kExitFit;
  }
  return kExitOk;
}

std::string fmt3(double v) {
  if (is_missing(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.lower.empty() != f.upper.empty()) {
    err << "error: --lower and --upper must be given together\n";
    return kExitUsage;
  }
  try {
    const DataTable truth = read_csv_file(f.truth);
    const DataTable masked = read_csv_file(f.masked);
    const DataTable imputed = read_csv_file(f.imputed);
    const auto scores = smae(imputed, truth, masked);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s %10s\n", "column", "smae");
    out << buf;
    for (Index j = 0; j < truth.n_cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%-20s %10s\n", truth.col_name(j).c_str(),
                    fmt3(scores[static_cast<std::size_t>(j)]).c_str());
      out << buf;
    }
    out << "mean smae: " << fmt3(mean_defined(scores)) << '\n';
    out << "mae: " << fmt3(mae(imputed, truth, masked)) << '\n';
    if (!f.lower.empty()) {
      const DataTable lower = read_csv_file(f.lower);
      const DataTable upper = read_csv_file(f.upper);
      out << "coverage: " << fmt3(coverage(lower, upper, truth, masked)) << '\n';
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian copula imputation for mixed-type tables", "gcopula"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  ModelFlags model_flags;
  StreamFlags stream_flags;
  ImputeFlags impute_flags;
  StreamIo stream_io;
  EvaluateFlags eval_flags;

  CLI::App* impute = app.add_subcommand("impute", "Fit a model and fill missing cells");
  impute->option_defaults()->always_capture_default();
  impute->add_option("input", impute_flags.input, "Input CSV ('-' for stdin)")->required();
  impute->add_option("-o,--output", impute_flags.output, "Imputed CSV ('-' for stdout)");
  add_model_flags(impute, model_flags, true);
  add_stream_flags(impute, stream_flags, false);
  impute->add_option("--ci", impute_flags.ci, "Confidence intervals written next to the output")
      ->check(CLI::IsMember({"none", "analytic", "quantile"}));
  impute->add_option("--alpha", impute_flags.alpha, "Confidence intervals cover 1 - alpha");
  impute->add_option("--num-samples", impute_flags.num_samples, "Draws behind quantile intervals");
  impute->add_option("--multiple", impute_flags.multiple, "Number of multiple imputations to write");
  impute->add_option("--corr-out", impute_flags.corr_out, "Write the fitted correlation matrix here");

  CLI::App* stream = app.add_subcommand("stream", "Impute rows one at a time while updating the model");
  stream->option_defaults()->always_capture_default();
  stream->add_option("input", stream_io.input, "Input CSV ('-' for stdin)");
  stream->add_option("-o,--output", stream_io.output, "Output CSV ('-' for stdout)");
  stream->add_option("--truth", stream_io.truth, "CSV of revealed rows, line-aligned with the input");
  add_model_flags(stream, model_flags, false);
  add_stream_flags(stream, stream_flags, true);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score imputations against the truth");
  evaluate->option_defaults()->always_capture_default();
  evaluate->add_option("--truth", eval_flags.truth, "Complete CSV")->required();
  evaluate->add_option("--masked", eval_flags.masked, "CSV given to the imputer")->required();
  evaluate->add_option("--imputed", eval_flags.imputed, "Imputed CSV")->required();
  evaluate->add_option("--lower", eval_flags.lower, "Lower confidence bounds");
  evaluate->add_option("--upper", eval_flags.upper, "Upper confidence bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (impute->parsed()) return cmd_impute(impute_flags, model_flags, stream_flags, in, out, err);
  if (stream->parsed()) return cmd_stream(stream_io, model_flags, stream_flags, in, out, err);
  return cmd_evaluate(eval_flags, out, err);
}

}  // namespace gcopula
