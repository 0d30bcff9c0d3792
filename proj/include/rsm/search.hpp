#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rsm/dataset.hpp"
#include "rsm/error.hpp"
#include "rsm/random.hpp"
#include "rsm/svr.hpp"

namespace rsm {

// A set of k distinct predictor columns, stored in ascending order.
struct Subspace {
  std::vector<int> indices;
  long iteration_drawn = 0;

  friend bool operator==(const Subspace&, const Subspace&) = default;
};

struct SearchConfig {
  int subspace_dim = 3;                   // k
  double selection_threshold = 0.01;      // eta
  double termination_threshold = 0.00001; // tau
  long max_iterations = 10000;
  int folds = 5;
  std::uint64_t seed = 0;
  // Consecutive draws with delta_e < tau required to stop. 1 is the literal
  // rule: the first non-improving draw ends the search.
  int patience = 1;

  void validate() const {
    require(subspace_dim >= 1, "search: subspace_dim must be >= 1");
    require(termination_threshold > 0.0, "search: tau must be > 0");
    require(termination_threshold < selection_threshold, "search: tau must be below eta");
    require(selection_threshold < 1.0, "search: eta must be below 1");
    require(folds >= 2, "search: folds must be >= 2");
    require(max_iterations >= 1, "search: max_iterations must be >= 1");
    require(patience >= 1, "search: patience must be >= 1");
  }
};

// Fold id per row. Built by shuffling rows with a seeded generator and
// dealing them round-robin, so fold sizes differ by at most one.
struct FoldSplit {
  std::vector<int> assignments;
  int folds = 0;

  static FoldSplit make(Eigen::Index n, int folds, Rng& rng) {
    require(folds >= 2, "fold split: need at least two folds");
    require(n >= folds, "fold split: fewer rows than folds");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    FoldSplit split;
    split.folds = folds;
    split.assignments.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
      split.assignments[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % folds);
    return split;
  }

  static FoldSplit from_assignments(std::vector<int> assignments, int folds) {
    FoldSplit split{std::move(assignments), folds};
    split.validate();
    return split;
  }

  void validate() const {
    require(folds >= 2, "fold split: need at least two folds");
    std::vector<long> sizes(static_cast<std::size_t>(folds), 0);
    for (int a : assignments) {
      require(a >= 0 && a < folds, "fold split: fold id out of range");
      ++sizes[static_cast<std::size_t>(a)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    require(*lo >= 1, "fold split: empty fold");
    require(*hi - *lo <= 1, "fold split: fold sizes differ by more than one");
  }

  Eigen::Index rows() const { return static_cast<Eigen::Index>(assignments.size()); }

  std::vector<Eigen::Index> validation_rows(int fold) const {
    std::vector<Eigen::Index> rows_out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) rows_out.push_back(static_cast<Eigen::Index>(i));
    return rows_out;
  }

  std::vector<Eigen::Index> training_rows(int fold) const {
    std::vector<Eigen::Index> rows_out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) rows_out.push_back(static_cast<Eigen::Index>(i));
    return rows_out;
  }
};

enum class Decision { accepted, rejected, terminated };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::accepted: return "accepted";
    case Decision::rejected: return "rejected";
    case Decision::terminated: return "terminated";
  }
  return "unknown";
}

inline Decision decision_from_string(const std::string& s) {
  if (s == "accepted") return Decision::accepted;
  if (s == "rejected") return Decision::rejected;
  if (s == "terminated") return Decision::terminated;
  throw InputError("unknown decision '" + s + "'");
}

struct SearchRecord {
  long iteration = 0;
  std::vector<int> indices;
  double cv = 0.0;
  double delta_e = 0.0;
  Decision decision = Decision::rejected;

  friend bool operator==(const SearchRecord&, const SearchRecord&) = default;
};

struct SearchTrace {
  std::vector<SearchRecord> records;
  // CV_0 followed by CV* after each acceptance.
  std::vector<double> best_cv_history;
  bool hit_iteration_cap = false;
  // Fold fits that ran out of SVR updates and kept their last iterate.
  long unconverged_fits = 0;

  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

// Uniform draw of k distinct columns out of p (partial Fisher-Yates).
inline Subspace draw_subspace(Rng& rng, int p, int k) {
  if (k < 1 || k > p)
    throw InputError("draw_subspace: need 1 <= k <= p (k=" + std::to_string(k) +
                     ", p=" + std::to_string(p) + ")");
  std::vector<int> pool(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) pool[static_cast<std::size_t>(j)] = j;
  for (int i = 0; i < k; ++i) {
    const auto remaining = static_cast<std::uint64_t>(p - i);
    const auto pick = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.below(remaining));
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick]);
  }
  Subspace s;
  s.indices.assign(pool.begin(), pool.begin() + k);
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

inline Matrix project_columns(const Matrix& x, const std::vector<int>& indices) {
  Matrix z(x.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    require(indices[c] >= 0 && indices[c] < x.cols(), "subspace index out of range");
    z.col(static_cast<Eigen::Index>(c)) = x.col(indices[c]);
  }
  return z;
}

inline Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

inline Vector select_rows(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(rows[r]);
  return out;
}

inline double rms(const Vector& v) {
  return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

// Current residual targets per fold. residuals[q] covers all n rows:
// y - (training mean of fold q) - sum of accepted fold-q submodels.
struct FoldResiduals {
  std::vector<double> baselines;  // per-fold training means
  std::vector<Vector> residuals;
};

// Constant model per fold (training mean) and the CV_0 it scores.
struct ConstantModelScore {
  FoldResiduals state;
  double cv = 0.0;
  std::vector<double> fold_rmse;
};

inline ConstantModelScore constant_model_cv(const Vector& y, const FoldSplit& split) {
  require(split.rows() == y.size(), "constant model: split/response size mismatch");
  ConstantModelScore out;
  for (int q = 0; q < split.folds; ++q) {
    const auto train = split.training_rows(q);
    const auto valid = split.validation_rows(q);
    const double mean = select_rows(y, train).mean();
    Vector residual = y.array() - mean;
    out.state.baselines.push_back(mean);
    out.fold_rmse.push_back(rms(select_rows(residual, valid)));
    out.state.residuals.push_back(std::move(residual));
  }
  double total = 0.0;
  for (double r : out.fold_rmse) total += r;
  out.cv = total / static_cast<double>(split.folds);
  return out;
}

// Per-fold fits of one candidate subspace against the current residuals.
struct CandidateEvaluation {
  double cv = 0.0;
  std::vector<double> fold_rmse;
  std::vector<SvrModel> fold_models;
  std::vector<Vector> fold_predictions;  // over all n rows
  int unconverged_fits = 0;
};

inline CandidateEvaluation evaluate_candidate(const Subspace& candidate, const FoldResiduals& state,
                                              const Dataset& data, const FoldSplit& split,
                                              const SvrConfig& svr) {
  require(split.rows() == data.rows(), "cv_score: split/data size mismatch");
  require(static_cast<int>(state.residuals.size()) == split.folds,
          "cv_score: residuals must be given per fold");
  const Matrix z = project_columns(data.x, candidate.indices);
  CandidateEvaluation out;
  double total = 0.0;
  for (int q = 0; q < split.folds; ++q) {
    const auto train = split.training_rows(q);
    const auto valid = split.validation_rows(q);
    if (train.size() < 2) throw InputError("cv_score: fold with fewer than two training rows");
    const Vector& residual = state.residuals[static_cast<std::size_t>(q)];
    bool converged = true;
    SvrModel model = svr_fit_or_last_iterate(select_rows(z, train), select_rows(residual, train), svr, converged);
    out.unconverged_fits += !converged;
    Vector predictions = svr_predict(model, z);
    const Vector remaining = select_rows(Vector(residual - predictions), valid);
    const double fold_rmse = rms(remaining);
    total += fold_rmse;
    out.fold_rmse.push_back(fold_rmse);
    out.fold_models.push_back(std::move(model));
    out.fold_predictions.push_back(std::move(predictions));
  }
  out.cv = total / static_cast<double>(split.folds);
  return out;
}

// CV_t: mean over folds of the validation RMSE after adding the candidate.
inline double cv_score(const Subspace& candidate, const FoldResiduals& state, const Dataset& data,
                       const FoldSplit& split, const SvrConfig& svr) {
  return evaluate_candidate(candidate, state, data, split, svr).cv;
}

// Relative error reduction (CV* - CV_t) / CV*.
inline double delta_e(double cv_star, double cv_t) {
  if (!(cv_star > 0.0)) throw NumericError("delta_e: CV* must be positive");
  return (cv_star - cv_t) / cv_star;
}

struct AcceptedSubspace {
  Subspace subspace;
  double cv = 0.0;
  std::vector<SvrModel> fold_models;
};

struct SearchResult {
  std::vector<AcceptedSubspace> accepted;
  SearchTrace trace;
  FoldSplit split;
  FoldResiduals final_state;
  double cv0 = 0.0;
  double cv_star = 0.0;

  std::vector<Subspace> subspaces() const {
    std::vector<Subspace> out;
    for (const auto& a : accepted) out.push_back(a.subspace);
    return out;
  }
};

// Randomized forward-stagewise subspace search. Each iteration draws k
// columns, fits them to the current per-fold residuals and scores CV_t.
//   delta_e > eta          accept: CV* <- CV_t, residuals updated
//   tau <= delta_e <= eta  reject
//   delta_e < tau          reject; stop once `patience` such draws occur
//                          in a row
// The loop also stops at max_iterations, or when CV* reaches zero.
inline SearchResult run_search(const Dataset& data, const SearchConfig& config,
                               const SvrConfig& svr) {
  config.validate();
  svr.validate();
  data.validate();
  require(data.rows() >= config.folds, "run_search: fewer rows than folds");
  require(config.subspace_dim <= data.cols(), "run_search: subspace_dim exceeds predictor count");

  Rng fold_rng(derive_seed(config.seed, 0));
  Rng draw_rng(derive_seed(config.seed, 1));

  SearchResult result;
  result.split = FoldSplit::make(data.rows(), config.folds, fold_rng);
  auto initial = constant_model_cv(data.y, result.split);
  result.final_state = std::move(initial.state);
  result.cv0 = initial.cv;
  result.cv_star = initial.cv;
  result.trace.best_cv_history.push_back(initial.cv);

  const int p = static_cast<int>(data.cols());
  int below_tau = 0;
  for (long t = 1; t <= config.max_iterations; ++t) {
    if (!(result.cv_star > 0.0)) break;  // nothing left to explain
    Subspace candidate = draw_subspace(draw_rng, p, config.subspace_dim);
    candidate.iteration_drawn = t;
    auto eval = evaluate_candidate(candidate, result.final_state, data, result.split, svr);
    result.trace.unconverged_fits += eval.unconverged_fits;
    const double de = delta_e(result.cv_star, eval.cv);

    SearchRecord record{t, candidate.indices, eval.cv, de, Decision::rejected};
    if (de > config.selection_threshold) {
      record.decision = Decision::accepted;
      below_tau = 0;
      result.cv_star = eval.cv;
      result.trace.best_cv_history.push_back(eval.cv);
      for (int q = 0; q < config.folds; ++q)
        result.final_state.residuals[static_cast<std::size_t>(q)] -=
            eval.fold_predictions[static_cast<std::size_t>(q)];
      result.accepted.push_back({std::move(candidate), eval.cv, std::move(eval.fold_models)});
    } else if (de < config.termination_threshold) {
      if (++below_tau >= config.patience) record.decision = Decision::terminated;
    } else {
      below_tau = 0;
    }
    result.trace.records.push_back(record);
    if (record.decision == Decision::terminated) break;
    if (t == config.max_iterations) result.trace.hit_iteration_cap = true;
  }
  return result;
}

}  // namespace rsm
