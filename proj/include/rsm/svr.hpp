#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rsm/error.hpp"
#include "rsm/kernels.hpp"

namespace rsm {

struct SvrConfig {
  double epsilon = 0.1;    // tube radius
  double cost = 1.0;       // C = 1 / lambda
  KernelSpec kernel;
  double tolerance = 1e-4; // maximal KKT violation at exit
  // Budget in sweeps of n pair updates; 0 selects 10 * n sweeps.
  long max_passes = 0;

  void validate() const {
    require(epsilon >= 0.0 && std::isfinite(epsilon), "svr epsilon must be >= 0");
    require(cost > 0.0 && std::isfinite(cost), "svr cost must be > 0");
    require(tolerance > 0.0, "svr tolerance must be > 0");
    require(max_passes >= 0, "svr max_passes must be >= 0");
    kernel.validate();
  }
};

// Fitted epsilon-SVR submodel: g(z) = sum_i alpha_i K(z, support_i) + intercept.
// Only points with nonzero signed coefficient are kept as support points.
struct SvrModel {
  Vector alphas;          // signed coefficients, one per support point
  Matrix support_points;  // m x k
  double intercept = 0.0;
  KernelSpec kernel;
  int training_dimension = 0;
  // Solver diagnostics.
  double dual_objective = 0.0;
  long iterations = 0;

  Eigen::Index support_size() const { return alphas.size(); }
};

class SvrConvergenceError : public ConvergenceError {
 public:
  SvrConvergenceError(const std::string& what, SvrModel best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const SvrModel& best_iterate() const noexcept { return best_; }

 private:
  SvrModel best_;
};

namespace detail {

// Pairwise dual coordinate solver for the epsilon-SVR dual written over 2n
// nonnegative variables a (a_i = alpha+_i, a_{n+i} = alpha-_i) with labels
// s = (+1..., -1...):
//
//   min  1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
//   Q_ij = s_i s_j K(i mod n, j mod n),  p_i = eps - r_i,  p_{n+i} = eps + r_i.
//
// i is the maximal KKT violator; j maximizes the second-order gain among
// the violating partners.
struct SmoResult {
  Vector beta;  // alpha+ - alpha-
  double bias = 0.0;
  double objective = 0.0;
  long iterations = 0;
  bool converged = false;
};

inline SmoResult solve_svr_dual(const Matrix& gram, const Vector& targets, double epsilon,
                                double cost, double tolerance, long max_iterations) {
  const Eigen::Index n = gram.rows();
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // a[0, n) = alpha+, a[n, 2n) = alpha-; same layout for the gradient.
  std::vector<double> alpha(static_cast<std::size_t>(2 * n), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(2 * n));
  double* ap = alpha.data();
  double* am = ap + n;
  double* gp = grad.data();
  double* gm = gp + n;
  for (Eigen::Index u = 0; u < n; ++u) {
    gp[u] = epsilon - targets(u);
    gm[u] = epsilon + targets(u);
  }
  std::vector<double> diag(static_cast<std::size_t>(n));
  for (Eigen::Index u = 0; u < n; ++u) diag[static_cast<std::size_t>(u)] = gram(u, u);
  const double* kd = diag.data();

  SmoResult result;
  long iter = 0;
  while (true) {
    // i: maximal violator over I_up = {alpha+ < C} u {alpha- > 0}.
    double gmax = -kInf;
    Eigen::Index i_sel = -1;
    for (Eigen::Index u = 0; u < n; ++u) {
      if (ap[u] < cost && -gp[u] >= gmax) {
        gmax = -gp[u];
        i_sel = u;
      }
      if (am[u] > 0.0 && gm[u] >= gmax) {
        gmax = gm[u];
        i_sel = n + u;
      }
    }

    // j: over I_low = {alpha+ > 0} u {alpha- < C}, maximizing the
    // second-order decrease diff^2 / quad. The pair moves beta_i and beta_j
    // in opposite directions, so quad = K_ii + K_jj - 2 K_ij for any labels.
    double gmax2 = -kInf;
    Eigen::Index j_sel = -1;
    double best_num = 0.0, best_den = 1.0;
    if (i_sel >= 0) {
      const Eigen::Index bi = i_sel < n ? i_sel : i_sel - n;
      const double* ki = gram.col(bi).data();
      const double di = kd[bi];
      for (Eigen::Index u = 0; u < n; ++u) {
        const bool plus = ap[u] > 0.0;
        const bool minus = am[u] < cost;
        if (!plus && !minus) continue;
        double quad = di + kd[u] - 2.0 * ki[u];
        if (quad <= 0.0) quad = kTau;
        if (plus) {
          gmax2 = std::max(gmax2, gp[u]);
          const double diff = gmax + gp[u];
          if (diff > 0.0 && diff * diff * best_den >= best_num * quad) {
            best_num = diff * diff;
            best_den = quad;
            j_sel = u;
          }
        }
        if (minus) {
          gmax2 = std::max(gmax2, -gm[u]);
          const double diff = gmax - gm[u];
          if (diff > 0.0 && diff * diff * best_den >= best_num * quad) {
            best_num = diff * diff;
            best_den = quad;
            j_sel = n + u;
          }
        }
      }
    }

    if (i_sel < 0 || j_sel < 0 || gmax + gmax2 < tolerance) {
      result.converged = true;
      break;
    }
    if (iter >= max_iterations) break;
    ++iter;

    const Eigen::Index i = i_sel, j = j_sel;
    const Eigen::Index bi = i < n ? i : i - n, bj = j < n ? j : j - n;
    const double si = i < n ? 1.0 : -1.0, sj = j < n ? 1.0 : -1.0;
    const double q_ij = si * sj * gram(bi, bj);
    const double old_ai = alpha[static_cast<std::size_t>(i)];
    const double old_aj = alpha[static_cast<std::size_t>(j)];
    const double gi = grad[static_cast<std::size_t>(i)], gj = grad[static_cast<std::size_t>(j)];
    double ai = old_ai, aj = old_aj;

    if (si != sj) {
      double quad = kd[bi] + kd[bj] + 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-gi - gj) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > cost) {
          ai = cost;
          aj = cost - diff;
        }
      } else if (aj > cost) {
        aj = cost;
        ai = cost + diff;
      }
    } else {
      double quad = kd[bi] + kd[bj] - 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (gi - gj) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > cost) {
        if (ai > cost) {
          ai = cost;
          aj = sum - cost;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > cost) {
        if (aj > cost) {
          aj = cost;
          ai = sum - cost;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    alpha[static_cast<std::size_t>(i)] = ai;
    alpha[static_cast<std::size_t>(j)] = aj;

    const double dbi = si * (ai - old_ai), dbj = sj * (aj - old_aj);
    const double* ki = gram.col(bi).data();
    const double* kj = gram.col(bj).data();
    for (Eigen::Index u = 0; u < n; ++u) {
      const double w = ki[u] * dbi + kj[u] * dbj;
      gp[u] += w;
      gm[u] -= w;
    }
  }

  result.iterations = iter;
  result.beta.resize(n);
  for (Eigen::Index u = 0; u < n; ++u) result.beta(u) = ap[u] - am[u];

  // Offset rho from the KKT conditions; decision value is K beta - rho.
  // s*G per variable: alpha+ -> gp, alpha- -> -gm.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  long n_free = 0;
  auto visit = [&](double a, double yg, bool plus) {
    if (a >= cost) {
      if (plus) lb = std::max(lb, yg);
      else ub = std::min(ub, yg);
    } else if (a <= 0.0) {
      if (plus) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  };
  for (Eigen::Index u = 0; u < n; ++u) visit(ap[u], gp[u], true);
  for (Eigen::Index u = 0; u < n; ++u) visit(am[u], -gm[u], false);
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  result.bias = -rho;

  // f(a) = 1/2 a'Qa + p'a = 1/2 sum_t a_t (G_t + p_t)
  double objective = 0.0;
  for (Eigen::Index u = 0; u < n; ++u) {
    objective += ap[u] * (gp[u] + epsilon - targets(u));
    objective += am[u] * (gm[u] + epsilon + targets(u));
  }
  result.objective = objective / 2.0;
  return result;
}

}  // namespace detail

// Dual objective 1/2 b'Kb + eps |b|_1 - r'b of a signed coefficient vector.
// Equals the solver objective whenever alpha+ and alpha- are complementary.
inline double svr_dual_objective(const Matrix& gram, const Vector& targets, const Vector& beta,
                                 double epsilon) {
  return 0.5 * beta.dot(gram * beta) + epsilon * beta.lpNorm<1>() - targets.dot(beta);
}

// Fits g(z) to residual targets r under the epsilon-insensitive loss.
inline SvrModel svr_fit(const Matrix& z, const Vector& targets, const SvrConfig& config) {
  config.validate();
  require(z.rows() >= 2, "svr_fit: need at least two rows");
  require(z.rows() == targets.size(), "svr_fit: row/target count mismatch");
  require(z.cols() >= 1, "svr_fit: need at least one column");
  require_finite(z, "svr_fit: predictors");
  require_finite(targets, "svr_fit: targets");

  const Eigen::Index n = z.rows();
  const Matrix gram = kernel_matrix(config.kernel, z);
  const long passes = config.max_passes > 0 ? config.max_passes : 10 * static_cast<long>(n);
  const long budget = passes * static_cast<long>(n);
  const auto solved =
      detail::solve_svr_dual(gram, targets, config.epsilon, config.cost, config.tolerance, budget);

  SvrModel model;
  model.kernel = config.kernel;
  model.training_dimension = static_cast<int>(z.cols());
  model.intercept = solved.bias;
  model.dual_objective = solved.objective;
  model.iterations = solved.iterations;

  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i)
    if (solved.beta(i) != 0.0) support.push_back(i);
  model.alphas.resize(static_cast<Eigen::Index>(support.size()));
  model.support_points.resize(static_cast<Eigen::Index>(support.size()), z.cols());
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    model.alphas(row) = solved.beta(support[s]);
    model.support_points.row(row) = z.row(support[s]);
  }

  if (!solved.converged)
    throw SvrConvergenceError("svr_fit: no convergence after " +
                                  std::to_string(solved.iterations) + " pair updates",
                              std::move(model));
  return model;
}

// Same fit, but an exhausted update budget keeps the last iterate instead of
// throwing. Low-rank kernels with many bounded multipliers can need several
// times the default budget to close the last 1e-5 of the objective.
inline SvrModel svr_fit_or_last_iterate(const Matrix& z, const Vector& targets, const SvrConfig& config,
                                        bool& converged) {
  try {
    converged = true;
    return svr_fit(z, targets, config);
  } catch (const SvrConvergenceError& e) {
    converged = false;
    return e.best_iterate();
  }
}

inline Vector svr_predict(const SvrModel& model, const Matrix& z_new) {
  if (z_new.cols() != model.training_dimension)
    throw InputError("svr_predict: expected " + std::to_string(model.training_dimension) +
                     " columns, got " + std::to_string(z_new.cols()));
  Vector out = Vector::Constant(z_new.rows(), model.intercept);
  if (model.support_size() == 0) return out;
  const Matrix cross = cross_kernel(model.kernel, z_new, model.support_points);
  out.noalias() += cross * model.alphas;
  return out;
}

// Squared-loss smoother S' = K (K + lambda I)^{-1}, computed as the
// solution X of (K + lambda I) X = K through a Cholesky factorization.
inline Matrix ridge_smoother_from_gram(const Matrix& gram, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InputError("ridge_smoother: lambda must be positive");
  Matrix shifted = gram;
  shifted.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NumericError("ridge_smoother: K + lambda I is not positive definite");
  if (llt.rcond() < 1e-14) throw NumericError("ridge_smoother: K + lambda I is ill-conditioned");
  Matrix smoother = llt.solve(gram);
  // K and (K + lambda I)^{-1} commute; symmetrize away rounding.
  smoother = 0.5 * (smoother + smoother.transpose()).eval();
  return smoother;
}

inline Matrix ridge_smoother(const Matrix& z, const KernelSpec& kernel, double lambda) {
  kernel.validate();
  return ridge_smoother_from_gram(kernel_matrix(kernel, z), lambda);
}

}  // namespace rsm
