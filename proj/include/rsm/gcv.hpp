#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "rsm/dataset.hpp"
#include "rsm/ensemble.hpp"
#include "rsm/error.hpp"
#include "rsm/parallel.hpp"
#include "rsm/search.hpp"
#include "rsm/svr.hpp"

namespace rsm {

// A1: trace of the stagewise hat matrix sum_j S_j with
//     S_j = S'_j (I - sum_{l<j} S_l).
// A2: sum_j trace(S'_j), dropping the recursion.
// Both use squared-loss smoothers S'_j = K_j (K_j + lambda I)^{-1}.
enum class GcvVariant { A1, A2 };

inline const char* to_string(GcvVariant v) { return v == GcvVariant::A1 ? "A1" : "A2"; }

inline GcvVariant gcv_variant_from_string(const std::string& s) {
  if (s == "A1" || s == "a1") return GcvVariant::A1;
  if (s == "A2" || s == "a2") return GcvVariant::A2;
  throw InputError("unknown GCV variant '" + s + "' (expected A1 or A2)");
}

struct HyperGrid {
  std::vector<double> epsilons{0.01, 0.1, 0.5};
  std::vector<double> costs{1.0, 2.0, 5.0};

  void validate() const {
    require(!epsilons.empty() && !costs.empty(), "grid: epsilon and cost lists must be nonempty");
    require(std::set<double>(epsilons.begin(), epsilons.end()).size() == epsilons.size(),
            "grid: epsilon levels must be distinct");
    require(std::set<double>(costs.begin(), costs.end()).size() == costs.size(),
            "grid: cost levels must be distinct");
    for (double e : epsilons) require(e >= 0.0 && std::isfinite(e), "grid: epsilon must be >= 0");
    for (double c : costs) require(c > 0.0 && std::isfinite(c), "grid: cost must be > 0");
  }

  std::size_t size() const { return epsilons.size() * costs.size(); }
};

inline std::vector<Matrix> subspace_smoothers(const Matrix& x, const std::vector<Subspace>& accepted,
                                              const KernelSpec& kernel, double lambda) {
  std::vector<Matrix> out;
  out.reserve(accepted.size());
  for (const auto& s : accepted)
    out.push_back(ridge_smoother(project_columns(x, s.indices), kernel, lambda));
  return out;
}

// Dense S = sum_j S_j assembled through the stagewise recursion.
inline Matrix stagewise_hat_matrix(const std::vector<Matrix>& smoothers, Eigen::Index n) {
  Matrix total = Matrix::Zero(n, n);
  const Matrix identity = Matrix::Identity(n, n);
  for (const auto& s_prime : smoothers) total += s_prime * (identity - total);
  return total;
}

inline double smoother_traces(const Dataset& data, const std::vector<Subspace>& accepted,
                              const KernelSpec& kernel, double lambda, GcvVariant variant) {
  if (accepted.empty()) return 0.0;
  if (!(lambda > 0.0)) throw InputError("smoother_traces: lambda must be positive");
  const auto smoothers = subspace_smoothers(data.x, accepted, kernel, lambda);
  if (variant == GcvVariant::A2) {
    double total = 0.0;
    for (const auto& s : smoothers) total += s.trace();
    return total;
  }
  return stagewise_hat_matrix(smoothers, data.rows()).trace();
}

// (1/n) sum_i [(y_i - yhat_i) / (1 - trace/n)]^2
inline double gcv_score(const Vector& y, const Vector& fitted, double trace_total) {
  require(y.size() == fitted.size(), "gcv_score: size mismatch");
  require(y.size() >= 1, "gcv_score: empty response");
  const auto n = static_cast<double>(y.size());
  if (!(trace_total < n))
    throw NumericError("gcv_score: trace " + std::to_string(trace_total) +
                       " is not below n=" + std::to_string(y.size()));
  const double denom = 1.0 - trace_total / n;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = (y(i) - fitted(i)) / denom;
    total += r * r;
  }
  return total / n;
}

struct GridRow {
  double epsilon = 0.0;
  double cost = 0.0;
  GcvVariant variant = GcvVariant::A2;
  double trace = 0.0;
  double gcv = 0.0;  // +inf when the smoother saturates (trace >= n)
  int n_subspaces = 0;
  double cv_star_final = 0.0;
  long iterations = 0;
  bool hit_iteration_cap = false;
  long unconverged_fits = 0;  // SVR fits that kept their last iterate

  friend bool operator==(const GridRow&, const GridRow&) = default;
};

struct GridResult {
  double best_epsilon = 0.0;
  double best_cost = 0.0;
  EnsembleModel best_model;
  SearchResult best_search;
  std::vector<GridRow> table;  // epsilon-major enumeration order
};

// Runs the full search for every (epsilon, cost) cell with the same seed,
// refits on all rows and scores GCV on the normalized response. The lowest
// GCV wins; ties go to the smaller cost, then the smaller epsilon.
inline GridResult grid_search(const Dataset& data, const HyperGrid& grid,
                              const SearchConfig& search_cfg, const SvrConfig& svr_template,
                              GcvVariant variant, int threads = 1) {
  grid.validate();
  search_cfg.validate();
  if (!data.normalized) throw InputError("grid_search: dataset must be normalized");

  struct Cell {
    GridRow row;
    EnsembleModel model;
    SearchResult search;
  };
  const std::size_t cells = grid.size();
  std::vector<Cell> results(cells);
  parallel_for(cells, threads, [&](std::size_t index) {
    const double eps = grid.epsilons[index / grid.costs.size()];
    const double cost = grid.costs[index % grid.costs.size()];
    SvrConfig svr = svr_template;
    svr.epsilon = eps;
    svr.cost = cost;
    Cell cell;
    cell.search = run_search(data, search_cfg, svr);
    const auto accepted = cell.search.subspaces();
    auto finalized = finalize_with_fit(data, accepted, svr, search_cfg);
    cell.row.epsilon = eps;
    cell.row.cost = cost;
    cell.row.variant = variant;
    cell.row.trace = smoother_traces(data, accepted, svr.kernel, 1.0 / cost, variant);
    cell.row.gcv = cell.row.trace < static_cast<double>(data.rows())
                       ? gcv_score(data.y, finalized.fitted_normalized, cell.row.trace)
                       : std::numeric_limits<double>::infinity();
    cell.row.n_subspaces = static_cast<int>(accepted.size());
    cell.row.cv_star_final = cell.search.cv_star;
    cell.row.iterations = static_cast<long>(cell.search.trace.records.size());
    cell.row.hit_iteration_cap = cell.search.trace.hit_iteration_cap;
    cell.row.unconverged_fits = cell.search.trace.unconverged_fits + finalized.unconverged_fits;
    cell.model = std::move(finalized.model);
    results[index] = std::move(cell);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < cells; ++i) {
    const auto& a = results[i].row;
    const auto& b = results[best].row;
    if (a.gcv < b.gcv || (a.gcv == b.gcv && (a.cost < b.cost ||
                                             (a.cost == b.cost && a.epsilon < b.epsilon))))
      best = i;
  }
  if (!std::isfinite(results[best].row.gcv))
    throw NumericError("grid_search: every cell has a saturated smoother (trace >= n)");

  GridResult out;
  for (const auto& c : results) out.table.push_back(c.row);
  out.best_epsilon = results[best].row.epsilon;
  out.best_cost = results[best].row.cost;
  out.best_model = std::move(results[best].model);
  out.best_search = std::move(results[best].search);
  return out;
}

}  // namespace rsm
