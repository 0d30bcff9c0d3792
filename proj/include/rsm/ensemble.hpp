#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsm/dataset.hpp"
#include "rsm/error.hpp"
#include "rsm/search.hpp"
#include "rsm/svr.hpp"

namespace rsm {

struct EnsembleComponent {
  std::vector<int> indices;
  SvrModel model;
};

// Additive model y = baseline + sum_j g_j(z_j). Submodels live in the
// normalized space of the learning data; predictions and contributions are
// reported in original response units.
struct EnsembleModel {
  int p = 0;
  double baseline = 0.0;             // original units
  double baseline_normalized = 0.0;  // mean of the normalized learning response
  Normalization normalization;
  std::vector<std::string> labels;
  std::string response_label = "y";
  std::vector<EnsembleComponent> subspaces;  // acceptance order
  SvrConfig svr;
  SearchConfig search;
  std::uint64_t seed = 0;

  double response_scale() const { return normalization.response.scale(); }
};

inline EnsembleModel constant_ensemble(const Dataset& data, const SvrConfig& svr,
                                       const SearchConfig& search) {
  if (!data.normalized) throw InputError("finalize: dataset must be normalized");
  EnsembleModel model;
  model.p = static_cast<int>(data.cols());
  model.normalization = data.stats;
  model.labels = data.labels;
  model.response_label = data.response_label;
  model.baseline_normalized = data.y.mean();
  model.baseline = data.stats.response.inverse(model.baseline_normalized);
  model.svr = svr;
  model.search = search;
  model.seed = search.seed;
  return model;
}

struct FinalizedModel {
  EnsembleModel model;
  Vector fitted_normalized;  // baseline + sum of components on learning rows
  int unconverged_fits = 0;
};

// Refits the accepted subspaces on all learning rows, in acceptance order,
// each against the residual left by its predecessors.
inline FinalizedModel finalize_with_fit(const Dataset& data, const std::vector<Subspace>& accepted,
                                        const SvrConfig& svr, const SearchConfig& search = {}) {
  data.validate();
  FinalizedModel out{constant_ensemble(data, svr, search), {}, 0};
  Vector residual = data.y.array() - out.model.baseline_normalized;
  for (const auto& subspace : accepted) {
    for (int j : subspace.indices)
      require(j >= 0 && j < out.model.p, "finalize: subspace index out of range");
    const Matrix z = project_columns(data.x, subspace.indices);
    bool converged = true;
    SvrModel fit = svr_fit_or_last_iterate(z, residual, svr, converged);
    out.unconverged_fits += !converged;
    residual -= svr_predict(fit, z);
    out.model.subspaces.push_back({subspace.indices, std::move(fit)});
  }
  out.fitted_normalized = data.y - residual;
  return out;
}

inline EnsembleModel finalize(const Dataset& data, const std::vector<Subspace>& accepted,
                              const SvrConfig& svr, const SearchConfig& search = {}) {
  return finalize_with_fit(data, accepted, svr, search).model;
}

inline void check_prediction_input(const EnsembleModel& model, const Matrix& x) {
  if (x.cols() != model.p)
    throw InputError("predict: expected p=" + std::to_string(model.p) + " columns, got p=" +
                     std::to_string(x.cols()));
  require_finite(x, "predict: input");
}

// Per-component contributions in original units, one column per subspace.
inline Matrix component_contributions(const EnsembleModel& model, const Matrix& x_raw) {
  check_prediction_input(model, x_raw);
  const Matrix x = apply_normalization(model.normalization, x_raw);
  Matrix out(x.rows(), static_cast<Eigen::Index>(model.subspaces.size()));
  for (std::size_t j = 0; j < model.subspaces.size(); ++j) {
    const auto& component = model.subspaces[j];
    out.col(static_cast<Eigen::Index>(j)) =
        model.response_scale() * svr_predict(component.model, project_columns(x, component.indices));
  }
  return out;
}

// Sum of components in normalized units on already-normalized rows.
inline Vector predict_normalized(const EnsembleModel& model, const Matrix& x_normalized) {
  Vector out = Vector::Constant(x_normalized.rows(), model.baseline_normalized);
  for (const auto& component : model.subspaces)
    out += svr_predict(component.model, project_columns(x_normalized, component.indices));
  return out;
}

inline Vector predict(const EnsembleModel& model, const Matrix& x_raw) {
  const Matrix contributions = component_contributions(model, x_raw);
  Vector out = Vector::Constant(x_raw.rows(), model.baseline);
  for (Eigen::Index j = 0; j < contributions.cols(); ++j) out += contributions.col(j);
  return out;
}

using Contribution = std::pair<std::vector<int>, double>;

inline std::vector<Contribution> decompose(const EnsembleModel& model, const Vector& x_raw) {
  const Matrix row = x_raw.transpose();
  const Matrix contributions = component_contributions(model, row);
  std::vector<Contribution> out;
  for (std::size_t j = 0; j < model.subspaces.size(); ++j)
    out.emplace_back(model.subspaces[j].indices, contributions(0, static_cast<Eigen::Index>(j)));
  return out;
}

}  // namespace rsm
