#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "rsm/dataset.hpp"
#include "rsm/error.hpp"
#include "rsm/random.hpp"

namespace rsm {

enum class TermKind { linear, product, polynomial };

inline const char* to_string(TermKind kind) {
  switch (kind) {
    case TermKind::linear: return "linear";
    case TermKind::product: return "product";
    case TermKind::polynomial: return "polynomial";
  }
  return "unknown";
}

// One additive ground-truth term over a subset of columns.
//   linear:      coefficient * sum_j x_j
//   product:     coefficient * prod_j x_j
//   polynomial:  coefficient * sum_j x_j^degree
struct SynthTerm {
  TermKind kind = TermKind::linear;
  std::vector<int> indices;
  double coefficient = 1.0;
  int degree = 2;

  double evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    double value = kind == TermKind::product ? 1.0 : 0.0;
    for (int j : indices) {
      const double x = row(j);
      switch (kind) {
        case TermKind::linear: value += x; break;
        case TermKind::product: value *= x; break;
        case TermKind::polynomial: value += std::pow(x, degree); break;
      }
    }
    return coefficient * value;
  }
};

struct SynthSpec {
  int n = 200;
  int p = 20;
  std::vector<SynthTerm> terms;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    require(n >= 1, "synth: n must be >= 1");
    require(p >= 1, "synth: p must be >= 1");
    require(noise_sd >= 0.0 && std::isfinite(noise_sd), "synth: noise_sd must be >= 0");
    for (const auto& term : terms) {
      require(!term.indices.empty(), "synth: term without indices");
      for (int j : term.indices) require(j >= 0 && j < p, "synth: term index out of range");
      if (term.kind == TermKind::polynomial) require(term.degree >= 1, "synth: degree must be >= 1");
    }
  }

  // y = x1 + 2 x2 x3 + noise (zero-based columns 0, 1, 2).
  static SynthSpec interaction_benchmark(std::uint64_t seed, int n = 200, int p = 20,
                                         double noise_sd = 0.1) {
    SynthSpec spec;
    spec.n = n;
    spec.p = p;
    spec.noise_sd = noise_sd;
    spec.seed = seed;
    spec.terms = {{TermKind::linear, {0}, 1.0, 1}, {TermKind::product, {1, 2}, 2.0, 1}};
    return spec;
  }
};

// Latin hypercube over [0,1]^p: every column holds one draw from each of the
// n strata [i/n, (i+1)/n), placed in a random row order.
inline Matrix latin_hypercube(int n, int p, Rng& rng) {
  Matrix x(n, p);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    for (int i = 0; i < n; ++i) {
      const int stratum = order[static_cast<std::size_t>(i)];
      x(i, j) = (static_cast<double>(stratum) + rng.uniform()) / static_cast<double>(n);
    }
  }
  return x;
}

struct SyntheticData {
  Dataset data;
  std::vector<std::vector<int>> ground_truth;
};

inline SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;
  out.data.x = latin_hypercube(spec.n, spec.p, rng);
  out.data.y.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    double value = 0.0;
    for (const auto& term : spec.terms) value += term.evaluate(out.data.x.row(i));
    out.data.y(i) = value;
  }
  if (spec.noise_sd > 0.0)
    for (int i = 0; i < spec.n; ++i) out.data.y(i) += spec.noise_sd * rng.normal();
  out.data.labels = default_labels(spec.p);
  for (const auto& term : spec.terms) {
    std::vector<int> indices = term.indices;
    std::sort(indices.begin(), indices.end());
    out.ground_truth.push_back(indices);
  }
  return out;
}

// Union of ground-truth indices.
inline std::set<int> ground_truth_variables(const SyntheticData& synthetic) {
  std::set<int> all;
  for (const auto& set : synthetic.ground_truth) all.insert(set.begin(), set.end());
  return all;
}

// Structured-text form: {"n","p","terms":[{"type","indices","coefficient","degree"}],"noise_sd","seed"}.
inline SynthSpec synth_spec_from_json(const nlohmann::json& doc) {
  SynthSpec spec;
  try {
    spec.n = doc.at("n").get<int>();
    spec.p = doc.at("p").get<int>();
    spec.noise_sd = doc.at("noise_sd").get<double>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& t : doc.at("terms")) {
      SynthTerm term;
      const auto type = t.at("type").get<std::string>();
      if (type == "linear") term.kind = TermKind::linear;
      else if (type == "product") term.kind = TermKind::product;
      else if (type == "polynomial") term.kind = TermKind::polynomial;
      else throw InputError("synth: unknown term type '" + type + "'");
      term.indices = t.at("indices").get<std::vector<int>>();
      term.coefficient = t.value("coefficient", 1.0);
      term.degree = t.value("degree", 2);
      spec.terms.push_back(term);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline nlohmann::json to_json(const SynthSpec& spec) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& term : spec.terms) {
    nlohmann::json t = {{"type", to_string(term.kind)},
                        {"indices", term.indices},
                        {"coefficient", term.coefficient}};
    if (term.kind == TermKind::polynomial) t["degree"] = term.degree;
    terms.push_back(t);
  }
  return {{"n", spec.n}, {"p", spec.p}, {"terms", terms}, {"noise_sd", spec.noise_sd},
          {"seed", spec.seed}};
}

}  // namespace rsm
