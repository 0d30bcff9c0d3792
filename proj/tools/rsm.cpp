// rsm: randomized subspace SVR ensembles from the command line.
//
//   rsm synth    --out data.csv [--spec spec.json | --n --p --noise-sd --seed]
//   rsm fit      --data train.csv --model model.json
//   rsm predict  --model model.json --data x.csv --out pred.csv [--decompose]
//   rsm evaluate --data data.csv --report report.json --text report.txt
//   rsm report   --model model.json [--evaluation report.json] [--trace trace.jsonl]
//
// Exit codes: 0 ok, 1 input error, 2 convergence/numeric error, 3 internal
// invariant violation. Failures print one JSON record on stderr.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsm/rsm.hpp"

namespace {

using rsm::json;

struct DataOptions {
  std::string path;
  bool no_header = false;
  std::string response = "-1";

  rsm::ColumnRef column() const {
    long index = 0;
    std::size_t used = 0;
    try {
      index = std::stol(response, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == response.size() && !response.empty()) return index;
    return response;
  }
};

struct ModelOptions {
  rsm::SearchConfig search;
  rsm::SvrConfig svr;
  std::optional<double> gamma;
  std::string kernel = "polynomial";
  rsm::HyperGrid grid;
  std::string variant = "A2";
  int threads = 1;

  rsm::SvrConfig svr_template() const {
    rsm::SvrConfig out = svr;
    out.kernel.family = rsm::kernel_family_from_string(kernel);
    out.kernel.gamma = gamma ? *gamma : 1.0 / static_cast<double>(search.subspace_dim);
    return out;
  }
  rsm::GcvVariant gcv_variant() const { return rsm::gcv_variant_from_string(variant); }

  json config_json() const {
    return {{"search", rsm::to_json(search)}, {"svr", rsm::to_json(svr_template())},
            {"grid", rsm::to_json(grid)}, {"variant", variant}};
  }
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "CSV file")->required()->check(CLI::ExistingFile);
  cmd->add_flag("--no-header", d.no_header, "First line is data, not column names");
  cmd->add_option("--response", d.response, "Response column name or zero-based index (negative counts from the end)")
      ->capture_default_str();
}

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--subspace-dim", m.search.subspace_dim, "Variables per subspace (k)")->capture_default_str();
  cmd->add_option("--eta", m.search.selection_threshold, "Selection threshold (fraction)")->capture_default_str();
  cmd->add_option("--tau", m.search.termination_threshold, "Termination threshold (fraction)")->capture_default_str();
  cmd->add_option("--max-iterations", m.search.max_iterations, "Draw cap")->capture_default_str();
  cmd->add_option("--folds", m.search.folds, "Inner cross-validation folds")->capture_default_str();
  cmd->add_option("--patience", m.search.patience, "Consecutive draws below tau that stop the search")
      ->capture_default_str();
  cmd->add_option("--seed", m.search.seed, "Seed for every random choice")->capture_default_str();
  cmd->add_option("--epsilon-grid", m.grid.epsilons, "Epsilon levels")->delimiter(',')->capture_default_str();
  cmd->add_option("--cost-grid", m.grid.costs, "Cost levels")->delimiter(',')->capture_default_str();
  cmd->add_option("--gcv-variant", m.variant, "A1 (stagewise trace) or A2 (sum of traces)")
      ->check(CLI::IsMember({"A1", "A2"}))
      ->capture_default_str();
  cmd->add_option("--kernel", m.kernel, "linear, polynomial or rbf")
      ->check(CLI::IsMember({"linear", "polynomial", "rbf"}))
      ->capture_default_str();
  cmd->add_option("--gamma", m.gamma, "Polynomial scale (default 1/k)");
  cmd->add_option("--offset", m.svr.kernel.offset, "Polynomial offset")->capture_default_str();
  cmd->add_option("--degree", m.svr.kernel.degree, "Polynomial degree")->capture_default_str();
  cmd->add_option("--bandwidth", m.svr.kernel.bandwidth, "RBF bandwidth")->capture_default_str();
  cmd->add_option("--svr-tolerance", m.svr.tolerance, "KKT tolerance of the SVR solver")->capture_default_str();
  cmd->add_option("--max-passes", m.svr.max_passes, "SVR update budget in sweeps (0 = 10 per row)")
      ->capture_default_str();
  cmd->add_option("--threads", m.threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rsm::InputError("cannot write '" + path + "'");
  return out;
}

std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / p.stem()).string() + suffix;
}

// Selects model columns from a feature table: by label when the header names
// them all, otherwise positionally (a trailing extra column is taken to be
// the response and dropped).
rsm::Matrix feature_matrix(const rsm::CsvTable& table, const rsm::EnsembleModel& model,
                           const std::string& source) {
  const auto p = static_cast<std::size_t>(model.p);
  std::vector<std::size_t> columns;
  if (!table.header.empty()) {
    for (const auto& label : model.labels) {
      auto it = std::find(table.header.begin(), table.header.end(), label);
      if (it == table.header.end()) break;
      columns.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    if (columns.size() != p) columns.clear();
  }
  if (columns.empty() && table.columns > 0) {
    if (table.columns != p && table.columns != p + 1)
      throw rsm::InputError(source + ": expected p=" + std::to_string(p) + " predictor columns, got p=" +
                            std::to_string(table.columns));
    for (std::size_t c = 0; c < p; ++c) columns.push_back(c);
  }
  rsm::Matrix x(static_cast<Eigen::Index>(table.rows.size()), model.p);
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][columns[j]];
  return x;
}

void warn_unconverged(const std::vector<rsm::GridRow>& rows) {
  long total = 0;
  for (const auto& r : rows) total += r.unconverged_fits;
  if (total > 0)
    std::cerr << "warning: " << total
              << " SVR fits reached the update budget and kept their last iterate (raise --max-passes)\n";
}

std::string component_name(const rsm::EnsembleComponent& c, std::size_t rank,
                           const std::vector<std::string>& labels) {
  std::string name = "s" + std::to_string(rank + 1) + ":";
  for (std::size_t m = 0; m < c.indices.size(); ++m) {
    if (m) name += '+';
    name += labels[static_cast<std::size_t>(c.indices[m])];
  }
  return name;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec_path;
  std::string out;
  std::string truth;
  int n = 200;
  int p = 20;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a, bool quiet) {
  rsm::SynthSpec spec;
  if (!a.spec_path.empty()) {
    std::ifstream in(a.spec_path);
    if (!in) throw rsm::InputError("cannot open '" + a.spec_path + "'");
    spec = rsm::synth_spec_from_json(rsm::parse_json_with_comments(in, a.spec_path));
  } else {
    spec = rsm::SynthSpec::interaction_benchmark(a.seed, a.n, a.p, a.noise_sd);
  }
  const auto synthetic = rsm::generate_synthetic(spec);
  const std::string header = rsm::provenance(spec.seed, rsm::to_json(spec));
  auto out = open_output(a.out);
  rsm::write_csv(out, synthetic.data, header);
  if (!a.truth.empty()) {
    auto t = open_output(a.truth);
    t << "// " << header << '\n'
      << json{{"spec", rsm::to_json(spec)}, {"ground_truth", synthetic.ground_truth}}.dump(2) << '\n';
  }
  if (!quiet) std::cout << "wrote " << spec.n << " rows x " << spec.p << " predictors to " << a.out << '\n';
  return 0;
}

struct FitArgs {
  DataOptions data;
  ModelOptions model;
  std::string model_out;
  std::string grid_out;
  std::string trace_out;
  std::string fitted_out;
};

int run_fit(const FitArgs& a, bool quiet) {
  const auto raw = rsm::load_csv(a.data.path, !a.data.no_header, a.data.column());
  const auto data = rsm::normalize(raw);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
  const auto svr = a.model.svr_template();
  auto result = rsm::grid_search(data, a.model.grid, a.model.search, svr, a.model.gcv_variant(), a.model.threads);
  warn_unconverged(result.table);

  const std::string header = rsm::provenance(a.model.search.seed, a.model.config_json());
  {
    auto out = open_output(a.model_out);
    out << "// " << header << '\n' << rsm::to_json(result.best_model).dump(2) << '\n';
  }
  {
    auto out = open_output(a.grid_out.empty() ? sibling(a.model_out, ".grid.tsv") : a.grid_out);
    rsm::write_grid_table(out, result.table, header);
  }
  {
    auto out = open_output(a.trace_out.empty() ? sibling(a.model_out, ".trace.jsonl") : a.trace_out);
    rsm::write_trace(out, result.best_search.trace, header);
  }
  if (!a.fitted_out.empty()) {
    const auto refit = rsm::finalize_with_fit(data, result.best_search.subspaces(), result.best_model.svr,
                                              result.best_model.search);
    const rsm::Vector fitted = rsm::denormalize_response(data.stats, refit.fitted_normalized);
    auto out = open_output(a.fitted_out);
    out << "# " << header << "\nfitted\n";
    for (Eigen::Index i = 0; i < fitted.size(); ++i) out << rsm::format_double(fitted(i)) << '\n';
  }
  if (!quiet) {
    std::cout << "epsilon " << rsm::format_double(result.best_epsilon) << "  cost "
              << rsm::format_double(result.best_cost) << "  subspaces " << result.best_model.subspaces.size()
              << "  draws " << result.best_search.trace.records.size() << '\n';
    std::cout << rsm::format_critical_subspaces(rsm::report_critical_subspaces(result.best_model, data.labels));
  }
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string data;
  bool no_header = false;
  std::string out;
  bool decompose = false;
};

int run_predict(const PredictArgs& a) {
  const auto model = rsm::load_model(a.model);
  const auto table = rsm::read_csv_table(a.data, !a.no_header);
  const rsm::Matrix x = feature_matrix(table, model, a.data);
  const rsm::Matrix parts = rsm::component_contributions(model, x);
  rsm::Vector total = rsm::Vector::Constant(x.rows(), model.baseline);
  for (Eigen::Index j = 0; j < parts.cols(); ++j) total += parts.col(j);

  auto out = open_output(a.out);
  out << "# " << rsm::provenance(model.seed, rsm::model_config_json(model)) << '\n';
  out << "prediction";
  if (a.decompose) {
    out << ",baseline";
    for (std::size_t j = 0; j < model.subspaces.size(); ++j)
      out << ',' << component_name(model.subspaces[j], j, model.labels);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out << rsm::format_double(total(i));
    if (a.decompose) {
      out << ',' << rsm::format_double(model.baseline);
      for (Eigen::Index j = 0; j < parts.cols(); ++j) out << ',' << rsm::format_double(parts(i, j));
    }
    out << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  DataOptions data;
  ModelOptions model;
  int outer_folds = 5;
  std::string report;
  std::string text;
};

int run_evaluate(const EvaluateArgs& a, bool quiet) {
  const auto raw = rsm::load_csv(a.data.path, !a.data.no_header, a.data.column());
  const auto variant = a.model.gcv_variant();
  rsm::OuterOptions options;
  options.outer_folds = a.outer_folds;
  options.threads = a.model.threads;
  const auto eval = rsm::outer_evaluate(raw, a.model.search, a.model.grid, a.model.svr_template(), variant, options);
  const auto vars = rsm::extract_common_variables(eval.folds);
  std::vector<rsm::GridRow> rows;
  for (const auto& f : eval.folds) rows.insert(rows.end(), f.grid.begin(), f.grid.end());
  warn_unconverged(rows);

  json config = a.model.config_json();
  config["outer_folds"] = a.outer_folds;
  const std::string header = rsm::provenance(a.model.search.seed, config);
  const std::string text = rsm::evaluation_text(eval, vars, raw.labels, variant);
  {
    auto out = open_output(a.report);
    out << "// " << header << '\n' << rsm::evaluation_json(eval, vars, raw.labels, variant).dump(2) << '\n';
  }
  if (!a.text.empty()) {
    auto out = open_output(a.text);
    out << "# " << header << '\n' << text;
  }
  if (!quiet) std::cout << text;
  return 0;
}

struct ReportArgs {
  std::string model;
  std::string evaluation;
  std::string trace;
  std::string out;
};

int run_report(const ReportArgs& a) {
  const auto model = rsm::load_model(a.model);
  std::optional<std::set<int>> common;
  if (!a.evaluation.empty()) {
    std::ifstream in(a.evaluation);
    if (!in) throw rsm::InputError("cannot open '" + a.evaluation + "'");
    const auto doc = rsm::parse_json_with_comments(in, a.evaluation);
    try {
      const auto values = doc.at("variable_report").at("common_variables").get<std::vector<int>>();
      common = std::set<int>(values.begin(), values.end());
    } catch (const json::exception& e) {
      throw rsm::InputError(a.evaluation + ": " + e.what());
    }
  }

  std::ostringstream text;
  text << "optimal hyperparameters: epsilon " << rsm::format_double(model.svr.epsilon) << "  cost "
       << rsm::format_double(model.svr.cost) << '\n';
  text << "baseline " << rsm::format_double(model.baseline) << " (" << model.response_label << ")\n\n";
  text << "critical subspaces" << (common ? " (* = common variable)" : "") << '\n';
  text << rsm::format_critical_subspaces(rsm::report_critical_subspaces(model, model.labels, common));
  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw rsm::InputError("cannot open '" + a.trace + "'");
    const auto trace = rsm::read_trace(in, a.trace);
    long accepted = 0;
    for (const auto& r : trace.records) accepted += r.decision == rsm::Decision::accepted;
    text << "\nsearch: " << trace.records.size() << " draws, " << accepted << " accepted";
    if (!trace.best_cv_history.empty()) text << ", final CV* " << rsm::format_double(trace.best_cv_history.back());
    if (!trace.records.empty()) text << ", last decision " << rsm::to_string(trace.records.back().decision);
    text << '\n';
  }

  if (a.out.empty()) {
    std::cout << text.str();
  } else {
    auto out = open_output(a.out);
    out << "# " << rsm::provenance(model.seed, rsm::model_config_json(model)) << '\n' << text.str();
  }
  return 0;
}

int fail(rsm::ErrorKind kind, const std::string& message) {
  const int code = rsm::exit_code(kind);
  std::cerr << json{{"error", rsm::to_string(kind)}, {"exit_code", code}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized subspace SVR ensembles with GCV-tuned hyperparameters"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress the summary on stdout");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset (Latin hypercube predictors)");
  synth_cmd->add_option("--out", synth.out, "Output CSV")->required();
  synth_cmd->add_option("--spec", synth.spec_path, "JSON spec: n, p, terms[], noise_sd, seed")->check(CLI::ExistingFile);
  synth_cmd->add_option("--truth", synth.truth, "Write the ground-truth term indices here");
  synth_cmd->add_option("--n", synth.n, "Rows (interaction benchmark)")->capture_default_str();
  synth_cmd->add_option("--p", synth.p, "Predictors (interaction benchmark)")->capture_default_str();
  synth_cmd->add_option("--noise-sd", synth.noise_sd, "Noise sd (interaction benchmark)")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed (interaction benchmark)")->capture_default_str();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Tune (epsilon, C) by GCV and fit the ensemble");
  add_data_options(fit_cmd, fit.data);
  add_model_options(fit_cmd, fit.model);
  fit_cmd->add_option("--model", fit.model_out, "Model file to write")->required();
  fit_cmd->add_option("--grid-table", fit.grid_out, "Grid table (default: <model>.grid.tsv)");
  fit_cmd->add_option("--trace", fit.trace_out, "Search trace of the chosen cell (default: <model>.trace.jsonl)");
  fit_cmd->add_option("--fitted", fit.fitted_out, "Fitted values on the training rows");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict with a saved model");
  predict_cmd->add_option("--model", predict.model, "Model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", predict.data, "Feature CSV")->required()->check(CLI::ExistingFile);
  predict_cmd->add_flag("--no-header", predict.no_header, "First line is data, not column names");
  predict_cmd->add_option("--out", predict.out, "Predictions CSV")->required();
  predict_cmd->add_flag("--decompose", predict.decompose, "Add baseline and per-subspace columns");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Outer cross-validation with common-variable extraction");
  add_data_options(evaluate_cmd, evaluate.data);
  add_model_options(evaluate_cmd, evaluate.model);
  evaluate_cmd->add_option("--outer-folds", evaluate.outer_folds, "Outer folds")->capture_default_str();
  evaluate_cmd->add_option("--report", evaluate.report, "JSON report")->required();
  evaluate_cmd->add_option("--text", evaluate.text, "Aligned text report");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Critical-subspace table for a saved model");
  report_cmd->add_option("--model", report.model, "Model file")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--evaluation", report.evaluation, "Evaluation report; marks common variables")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--trace", report.trace, "Search trace")->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report.out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(rsm::ErrorKind::input, e.what());
  }

  try {
    if (*synth_cmd) return run_synth(synth, quiet);
    if (*fit_cmd) return run_fit(fit, quiet);
    if (*predict_cmd) return run_predict(predict);
    if (*evaluate_cmd) return run_evaluate(evaluate, quiet);
    if (*report_cmd) return run_report(report);
  } catch (const rsm::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(rsm::ErrorKind::numeric, "out of memory");
  } catch (const std::exception& e) {
    return fail(rsm::ErrorKind::invariant, e.what());
  }
  return fail(rsm::ErrorKind::invariant, "no subcommand ran");
}
