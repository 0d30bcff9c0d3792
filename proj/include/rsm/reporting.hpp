#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rsm/dataset.hpp"
#include "rsm/ensemble.hpp"
#include "rsm/gcv.hpp"
#include "rsm/parallel.hpp"
#include "rsm/random.hpp"
#include "rsm/search.hpp"

namespace rsm {

struct FoldReport {
  int fold_id = 0;
  double test_rmse = 0.0;
  std::vector<std::vector<int>> accepted_subspaces;
  double epsilon = 0.0;
  double cost = 0.0;
  long n_learning = 0;
  long n_test = 0;
  std::vector<GridRow> grid;
};

struct OuterEvaluation {
  std::vector<FoldReport> folds;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;  // sample (n-1) standard deviation
  FoldSplit split;
};

struct OuterOptions {
  int outer_folds = 5;
  int threads = 1;
};

// Mean and sample standard deviation.
inline std::pair<double, double> mean_and_sd(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

// Outer cross-validation: each outer fold is held out as a test set; the
// rest is normalized on its own statistics, tuned by grid search and scored
// on the test rows in original units.
inline OuterEvaluation outer_evaluate(const Dataset& raw, const SearchConfig& config,
                                      const HyperGrid& grid, const SvrConfig& svr_template,
                                      GcvVariant variant, const OuterOptions& options = {}) {
  raw.validate();
  config.validate();
  grid.validate();
  if (raw.normalized) throw InputError("outer_evaluate: expects raw (unnormalized) data");
  require(options.outer_folds >= 2, "outer_evaluate: need at least two outer folds");
  require(raw.rows() >= 2 * options.outer_folds, "outer_evaluate: need n >= 2 * folds");

  Rng outer_rng(derive_seed(config.seed, 2));
  OuterEvaluation out;
  out.split = FoldSplit::make(raw.rows(), options.outer_folds, outer_rng);
  out.folds.resize(static_cast<std::size_t>(options.outer_folds));

  const int outer_workers = std::max(1, std::min(options.threads, options.outer_folds));
  const int inner_threads = std::max(1, options.threads / outer_workers);
  parallel_for(static_cast<std::size_t>(options.outer_folds), outer_workers, [&](std::size_t f) {
    const int fold = static_cast<int>(f);
    const auto learn_rows = out.split.training_rows(fold);
    const auto test_rows = out.split.validation_rows(fold);
    for (auto r : test_rows)
      if (std::binary_search(learn_rows.begin(), learn_rows.end(), r))
        throw InvariantError("outer_evaluate: test row also in learning rows");

    const Dataset learning = normalize(raw.subset(learn_rows));
    const Dataset test = raw.subset(test_rows);
    SearchConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, 100 + f);
    auto tuned = grid_search(learning, grid, fold_config, svr_template, variant, inner_threads);

    const Vector predictions = predict(tuned.best_model, test.x);
    FoldReport report;
    report.fold_id = fold;
    report.test_rmse = rms(Vector(test.y - predictions));
    for (const auto& s : tuned.best_model.subspaces) report.accepted_subspaces.push_back(s.indices);
    report.epsilon = tuned.best_epsilon;
    report.cost = tuned.best_cost;
    report.n_learning = static_cast<long>(learn_rows.size());
    report.n_test = static_cast<long>(test_rows.size());
    report.grid = std::move(tuned.table);
    out.folds[f] = std::move(report);
  });

  std::vector<double> rmses;
  for (const auto& f : out.folds) rmses.push_back(f.test_rmse);
  std::tie(out.mean_rmse, out.sd_rmse) = mean_and_sd(rmses);
  return out;
}

struct VariableReport {
  std::vector<std::set<int>> per_fold_variable_sets;
  std::set<int> common_variables;
  std::map<int, long> subspace_frequency;
};

// Per fold: union of accepted-subspace members. Common variables: the
// intersection of those unions across folds.
inline VariableReport extract_common_variables(const std::vector<FoldReport>& folds) {
  require(!folds.empty(), "extract_common_variables: need at least one fold");
  VariableReport report;
  for (const auto& fold : folds) {
    std::set<int> members;
    for (const auto& subspace : fold.accepted_subspaces) {
      for (int j : subspace) {
        members.insert(j);
        ++report.subspace_frequency[j];
      }
    }
    report.per_fold_variable_sets.push_back(std::move(members));
  }
  report.common_variables = report.per_fold_variable_sets.front();
  for (std::size_t f = 1; f < report.per_fold_variable_sets.size(); ++f) {
    std::set<int> kept;
    std::set_intersection(report.common_variables.begin(), report.common_variables.end(),
                          report.per_fold_variable_sets[f].begin(),
                          report.per_fold_variable_sets[f].end(),
                          std::inserter(kept, kept.begin()));
    report.common_variables = std::move(kept);
  }
  return report;
}

struct CriticalSubspaceRow {
  int rank = 0;  // 1-based acceptance order
  std::vector<int> indices;
  std::vector<std::string> members;
  std::vector<bool> common;  // member is in the common-variable set
};

inline std::vector<CriticalSubspaceRow> report_critical_subspaces(
    const std::vector<std::vector<int>>& subspaces, const std::vector<std::string>& labels,
    const std::optional<std::set<int>>& common = std::nullopt) {
  std::vector<CriticalSubspaceRow> rows;
  int rank = 0;
  for (const auto& indices : subspaces) {
    CriticalSubspaceRow row;
    row.rank = ++rank;
    row.indices = indices;
    for (int j : indices) {
      if (j < 0 || j >= static_cast<int>(labels.size()))
        throw InputError("report: subspace index " + std::to_string(j) + " has no label");
      row.members.push_back(labels[static_cast<std::size_t>(j)]);
      row.common.push_back(common && common->count(j) > 0);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<CriticalSubspaceRow> report_critical_subspaces(
    const EnsembleModel& model, const std::vector<std::string>& labels,
    const std::optional<std::set<int>>& common = std::nullopt) {
  if (static_cast<int>(labels.size()) != model.p)
    throw InputError("report: expected " + std::to_string(model.p) + " labels, got " +
                     std::to_string(labels.size()));
  std::vector<std::vector<int>> subspaces;
  for (const auto& s : model.subspaces) subspaces.push_back(s.indices);
  return report_critical_subspaces(subspaces, labels, common);
}

// Aligned text; members in the common-variable set carry a trailing '*'.
inline std::string format_critical_subspaces(const std::vector<CriticalSubspaceRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "rank" << "members\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(6) << row.rank;
    for (std::size_t m = 0; m < row.members.size(); ++m) {
      if (m) out << ' ';
      out << row.members[m] << (row.common[m] ? "*" : "");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace rsm
