#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rsm/dataset.hpp"
#include "rsm/ensemble.hpp"
#include "rsm/error.hpp"
#include "rsm/gcv.hpp"
#include "rsm/reporting.hpp"
#include "rsm/search.hpp"

namespace rsm {

using json = nlohmann::json;

inline constexpr const char* kToolName = "rsm";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

// Provenance line written at the top of every output file, without the
// comment marker.
inline std::string provenance(std::uint64_t seed, const json& config) {
  return std::string(kToolName) + " " + kToolVersion + " seed=" + std::to_string(seed) +
         " config=" + hex64(fnv1a(config.dump()));
}

// ---------------------------------------------------------------------------
// configs

inline json to_json(const KernelSpec& k) {
  return {{"family", to_string(k.family)}, {"gamma", k.gamma}, {"offset", k.offset},
          {"degree", k.degree}, {"bandwidth", k.bandwidth}};
}

inline KernelSpec kernel_from_json(const json& j) {
  KernelSpec k;
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.gamma = j.at("gamma").get<double>();
  k.offset = j.at("offset").get<double>();
  k.degree = j.at("degree").get<int>();
  k.bandwidth = j.at("bandwidth").get<double>();
  return k;
}

inline json to_json(const SvrConfig& c) {
  return {{"epsilon", c.epsilon}, {"cost", c.cost}, {"tolerance", c.tolerance},
          {"max_passes", c.max_passes}, {"kernel", to_json(c.kernel)}};
}

inline SvrConfig svr_config_from_json(const json& j) {
  SvrConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.cost = j.at("cost").get<double>();
  c.tolerance = j.at("tolerance").get<double>();
  c.max_passes = j.at("max_passes").get<long>();
  c.kernel = kernel_from_json(j.at("kernel"));
  return c;
}

inline json to_json(const SearchConfig& c) {
  return {{"subspace_dim", c.subspace_dim},
          {"selection_threshold", c.selection_threshold},
          {"termination_threshold", c.termination_threshold},
          {"max_iterations", c.max_iterations},
          {"folds", c.folds},
          {"patience", c.patience},
          {"seed", c.seed}};
}

inline SearchConfig search_config_from_json(const json& j) {
  SearchConfig c;
  c.subspace_dim = j.at("subspace_dim").get<int>();
  c.selection_threshold = j.at("selection_threshold").get<double>();
  c.termination_threshold = j.at("termination_threshold").get<double>();
  c.max_iterations = j.at("max_iterations").get<long>();
  c.folds = j.at("folds").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json to_json(const HyperGrid& g) { return {{"epsilons", g.epsilons}, {"costs", g.costs}}; }

inline json to_json(const ColumnStats& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"constant", s.constant}};
}

inline ColumnStats column_stats_from_json(const json& j) {
  return {j.at("mean").get<double>(), j.at("stddev").get<double>(), j.at("constant").get<bool>()};
}

// ---------------------------------------------------------------------------
// model file

inline json to_json(const EnsembleModel& model) {
  json predictors = json::array();
  for (const auto& s : model.normalization.predictors) predictors.push_back(to_json(s));
  json subspaces = json::array();
  for (const auto& c : model.subspaces) {
    json support = json::array();
    for (Eigen::Index r = 0; r < c.model.support_points.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index k = 0; k < c.model.support_points.cols(); ++k)
        row.push_back(c.model.support_points(r, k));
      support.push_back(row);
    }
    subspaces.push_back({{"indices", c.indices},
                         {"intercept", c.model.intercept},
                         {"alphas", std::vector<double>(c.model.alphas.data(),
                                                        c.model.alphas.data() + c.model.alphas.size())},
                         {"support_points", support}});
  }
  return {{"version", kModelFormatVersion},
          {"p", model.p},
          {"baseline", model.baseline},
          {"baseline_normalized", model.baseline_normalized},
          {"labels", model.labels},
          {"response", model.response_label},
          {"normalization", {{"predictors", predictors}, {"response", to_json(model.normalization.response)}}},
          {"subspaces", subspaces},
          {"svr_config", to_json(model.svr)},
          {"search_config", to_json(model.search)},
          {"seed", model.seed}};
}

inline EnsembleModel model_from_json(const json& doc) {
  EnsembleModel model;
  try {
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw InputError("model file: unsupported version " + std::to_string(version));
    model.p = doc.at("p").get<int>();
    model.baseline = doc.at("baseline").get<double>();
    model.baseline_normalized = doc.at("baseline_normalized").get<double>();
    model.labels = doc.at("labels").get<std::vector<std::string>>();
    model.response_label = doc.at("response").get<std::string>();
    for (const auto& s : doc.at("normalization").at("predictors"))
      model.normalization.predictors.push_back(column_stats_from_json(s));
    model.normalization.response = column_stats_from_json(doc.at("normalization").at("response"));
    model.svr = svr_config_from_json(doc.at("svr_config"));
    model.search = search_config_from_json(doc.at("search_config"));
    model.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& s : doc.at("subspaces")) {
      EnsembleComponent c;
      c.indices = s.at("indices").get<std::vector<int>>();
      c.model.kernel = model.svr.kernel;
      c.model.training_dimension = static_cast<int>(c.indices.size());
      c.model.intercept = s.at("intercept").get<double>();
      const auto alphas = s.at("alphas").get<std::vector<double>>();
      const auto& support = s.at("support_points");
      if (support.size() != alphas.size())
        throw InputError("model file: support/alpha count mismatch");
      c.model.alphas = Eigen::Map<const Vector>(alphas.data(), static_cast<Eigen::Index>(alphas.size()));
      c.model.support_points.resize(static_cast<Eigen::Index>(alphas.size()),
                                    c.model.training_dimension);
      for (std::size_t r = 0; r < support.size(); ++r) {
        const auto row = support[r].get<std::vector<double>>();
        if (row.size() != c.indices.size())
          throw InputError("model file: support point width differs from subspace size");
        for (std::size_t k = 0; k < row.size(); ++k)
          c.model.support_points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = row[k];
      }
      for (int j : c.indices)
        if (j < 0 || j >= model.p) throw InputError("model file: subspace index out of range");
      model.subspaces.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  if (static_cast<int>(model.normalization.predictors.size()) != model.p ||
      static_cast<int>(model.labels.size()) != model.p)
    throw InputError("model file: normalization/labels do not match p");
  return model;
}

inline json model_config_json(const EnsembleModel& model) {
  return {{"svr_config", to_json(model.svr)}, {"search_config", to_json(model.search)}};
}

inline void write_model(std::ostream& out, const EnsembleModel& model) {
  out << "// " << provenance(model.seed, model_config_json(model)) << '\n';
  out << to_json(model).dump(2) << '\n';
}

inline void save_model(const std::string& path, const EnsembleModel& model) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_model(out, model);
}

inline json parse_json_with_comments(std::istream& in, const std::string& source) {
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
}

inline EnsembleModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return model_from_json(parse_json_with_comments(in, path));
}

// ---------------------------------------------------------------------------
// search trace: one JSON object per line

inline json to_json(const SearchRecord& r) {
  return {{"t", r.iteration}, {"indices", r.indices}, {"cv", r.cv}, {"delta_e", r.delta_e},
          {"decision", to_string(r.decision)}};
}

inline void write_trace(std::ostream& out, const SearchTrace& trace, const std::string& header) {
  out << "# " << header << '\n';
  for (const auto& r : trace.records) out << to_json(r).dump() << '\n';
}

inline SearchTrace read_trace(std::istream& in, const std::string& source) {
  SearchTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = json::parse(line);
      SearchRecord r;
      r.iteration = j.at("t").get<long>();
      r.indices = j.at("indices").get<std::vector<int>>();
      r.cv = j.at("cv").get<double>();
      r.delta_e = j.at("delta_e").get<double>();
      r.decision = decision_from_string(j.at("decision").get<std::string>());
      if (r.decision == Decision::accepted) trace.best_cv_history.push_back(r.cv);
      trace.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw InputError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// grid table

inline void write_grid_table(std::ostream& out, const std::vector<GridRow>& rows,
                             const std::string& header) {
  out << "# " << header << '\n';
  out << "epsilon\tcost\tvariant\ttrace\tgcv\tn_subspaces\tcv_star_final\n";
  for (const auto& r : rows) {
    out << format_double(r.epsilon) << '\t' << format_double(r.cost) << '\t' << to_string(r.variant)
        << '\t' << format_double(r.trace) << '\t' << format_double(r.gcv) << '\t' << r.n_subspaces
        << '\t' << format_double(r.cv_star_final) << '\n';
  }
}

inline json to_json(const GridRow& r) {
  return {{"epsilon", r.epsilon}, {"cost", r.cost}, {"variant", to_string(r.variant)},
          {"trace", r.trace}, {"gcv", std::isfinite(r.gcv) ? json(r.gcv) : json("inf")},
          {"n_subspaces", r.n_subspaces}, {"cv_star_final", r.cv_star_final},
          {"iterations", r.iterations}, {"hit_iteration_cap", r.hit_iteration_cap},
          {"unconverged_fits", r.unconverged_fits}};
}

// ---------------------------------------------------------------------------
// evaluation reports

inline json to_json(const FoldReport& f) {
  json grid = json::array();
  for (const auto& r : f.grid) grid.push_back(to_json(r));
  return {{"fold_id", f.fold_id}, {"test_rmse", f.test_rmse},
          {"optimal_hyperparameters", {{"epsilon", f.epsilon}, {"cost", f.cost}}},
          {"accepted_subspaces", f.accepted_subspaces}, {"n_learning", f.n_learning},
          {"n_test", f.n_test}, {"grid", grid}};
}

inline json to_json(const VariableReport& v) {
  json sets = json::array();
  for (const auto& s : v.per_fold_variable_sets) sets.push_back(std::vector<int>(s.begin(), s.end()));
  json freq = json::array();
  for (const auto& [index, count] : v.subspace_frequency) freq.push_back({{"index", index}, {"count", count}});
  return {{"per_fold_variable_sets", sets},
          {"common_variables", std::vector<int>(v.common_variables.begin(), v.common_variables.end())},
          {"subspace_frequency", freq}};
}

inline json evaluation_json(const OuterEvaluation& eval, const VariableReport& vars,
                            const std::vector<std::string>& labels, GcvVariant variant) {
  json folds = json::array();
  for (const auto& f : eval.folds) folds.push_back(to_json(f));
  return {{"version", kReportFormatVersion},
          {"variant", to_string(variant)},
          {"labels", labels},
          {"folds", folds},
          {"mean_rmse", eval.mean_rmse},
          {"sd_rmse", eval.sd_rmse},
          {"variable_report", to_json(vars)}};
}

inline std::string join_labels(const std::set<int>& indices, const std::vector<std::string>& labels) {
  std::string out;
  for (int j : indices) {
    if (!out.empty()) out += ' ';
    out += labels.at(static_cast<std::size_t>(j));
  }
  return out.empty() ? "(none)" : out;
}

inline std::string evaluation_text(const OuterEvaluation& eval, const VariableReport& vars,
                                   const std::vector<std::string>& labels, GcvVariant variant) {
  std::ostringstream out;
  out << "outer cross-validation (" << eval.folds.size() << " folds, GCV " << to_string(variant)
      << ")\n\n";
  out << std::left << std::setw(6) << "fold" << std::setw(14) << "test_rmse" << std::setw(10)
      << "epsilon" << std::setw(8) << "cost" << "subspaces\n";
  for (const auto& f : eval.folds) {
    out << std::left << std::setw(6) << f.fold_id << std::setw(14) << format_double(f.test_rmse)
        << std::setw(10) << format_double(f.epsilon) << std::setw(8) << format_double(f.cost)
        << f.accepted_subspaces.size() << '\n';
  }
  out << "\nmean_rmse " << format_double(eval.mean_rmse) << "\nsd_rmse   "
      << format_double(eval.sd_rmse) << "\n\n";
  out << "common variables: " << join_labels(vars.common_variables, labels) << "\n\n";
  for (const auto& f : eval.folds) {
    out << "critical subspaces, fold " << f.fold_id << " (* = common variable)\n";
    out << format_critical_subspaces(
               report_critical_subspaces(f.accepted_subspaces, labels, vars.common_variables))
        << '\n';
  }
  return out.str();
}

}  // namespace rsm
