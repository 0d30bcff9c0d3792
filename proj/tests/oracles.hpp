#pragma once

// Reference computations used by the tests. None of them call into the
// solver code under test; they share only the kernel definitions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rsm/kernels.hpp"

namespace oracle {

using rsm::Matrix;
using rsm::Vector;

struct QpSolution {
  Vector beta;
  double objective = 0.0;
  double intercept = 0.0;
};

inline double dual_objective(const Matrix& k, const Vector& r, const Vector& beta, double eps) {
  return 0.5 * beta.dot(k * beta) + eps * beta.cwiseAbs().sum() - r.dot(beta);
}

// Intercept from the primal with w fixed: b minimizes
//   sum_i max(0, |d_i - b| - eps),  d_i = r_i - f0_i,
// a convex piecewise-linear function whose kinks sit at d_i +- eps. Returns
// the midpoint of the minimizing interval.
inline double primal_intercept(const Vector& d, double eps) {
  std::vector<double> knots;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    knots.push_back(d(i) - eps);
    knots.push_back(d(i) + eps);
  }
  std::sort(knots.begin(), knots.end());
  auto loss = [&](double b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) total += std::max(0.0, std::abs(d(i) - b) - eps);
    return total;
  };
  double best = std::numeric_limits<double>::infinity();
  for (double b : knots) best = std::min(best, loss(b));
  const double slack = 1e-12 * (1.0 + best);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double b : knots) {
    if (loss(b) <= best + slack) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  }
  return 0.5 * (lo + hi);
}

// Exact minimizer of the epsilon-SVR dual
//   min 1/2 b'Kb + eps |b|_1 - r'b   s.t.  sum b = 0,  -C <= b <= C
// by enumerating, for every coordinate, one of five states: at -C, at C, at
// 0, free positive, free negative. Each pattern fixes the bound coordinates
// and solves the equality-constrained stationarity system for the free ones;
// the feasible candidate with the lowest objective is the optimum (an
// extreme point of the optimal set always has a nonsingular system).
inline QpSolution svr_dual_bruteforce(const Matrix& k, const Vector& r, double eps, double cost) {
  const auto n = static_cast<int>(r.size());
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 5;
  QpSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> state(static_cast<std::size_t>(n));
  const double feas = 1e-12 * (1.0 + cost);

  for (int code = 0; code < patterns; ++code) {
    int c = code;
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      state[static_cast<std::size_t>(i)] = c % 5;
      c /= 5;
      if (state[static_cast<std::size_t>(i)] >= 3) free_idx.push_back(i);
    }
    Vector beta = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 0) beta(i) = -cost;
      else if (s == 1) beta(i) = cost;
    }
    const auto m = static_cast<Eigen::Index>(free_idx.size());
    if (m == 0) {
      if (std::abs(beta.sum()) > feas) continue;
    } else {
      Matrix system = Matrix::Zero(m + 1, m + 1);
      Vector rhs(m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        const int i = free_idx[static_cast<std::size_t>(a)];
        const double sign = state[static_cast<std::size_t>(i)] == 3 ? 1.0 : -1.0;
        for (Eigen::Index b = 0; b < m; ++b) system(a, b) = k(i, free_idx[static_cast<std::size_t>(b)]);
        system(a, m) = 1.0;
        system(m, a) = 1.0;
        double fixed = 0.0;
        for (int j = 0; j < n; ++j)
          if (state[static_cast<std::size_t>(j)] < 3) fixed += k(i, j) * beta(j);
        rhs(a) = r(i) - eps * sign - fixed;
      }
      double fixed_sum = 0.0;
      for (int j = 0; j < n; ++j)
        if (state[static_cast<std::size_t>(j)] < 3) fixed_sum += beta(j);
      rhs(m) = -fixed_sum;
      Eigen::FullPivLU<Matrix> lu(system);
      if (!lu.isInvertible()) continue;
      const Vector sol = lu.solve(rhs);
      bool ok = true;
      for (Eigen::Index a = 0; a < m && ok; ++a) {
        const int i = free_idx[static_cast<std::size_t>(a)];
        const double v = sol(a);
        if (state[static_cast<std::size_t>(i)] == 3) ok = v >= -feas && v <= cost + feas;
        else ok = v <= feas && v >= -cost - feas;
        beta(i) = std::clamp(v, -cost, cost);
      }
      if (!ok) continue;
    }
    const double obj = dual_objective(k, r, beta, eps);
    if (obj < best.objective) {
      best.objective = obj;
      best.beta = beta;
    }
  }
  const Vector d = r - k * best.beta;
  best.intercept = primal_intercept(d, eps);
  return best;
}

// Stagewise squared-loss fit: each stage solves (K_j + lambda I) c = r by
// Householder QR against the current residual r and subtracts K_j c.
inline Vector stagewise_ridge_fit(const std::vector<Matrix>& grams, const Vector& y, double lambda) {
  Vector residual = y;
  for (const auto& k : grams) {
    const Matrix shifted = k + lambda * Matrix::Identity(k.rows(), k.cols());
    const Vector coef = shifted.householderQr().solve(residual);
    residual -= k * coef;
  }
  return y - residual;
}

}  // namespace oracle
