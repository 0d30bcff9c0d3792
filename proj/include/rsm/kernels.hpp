#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rsm/error.hpp"

namespace rsm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite values");
}

enum class KernelFamily { linear, polynomial, rbf };

inline const char* to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::rbf: return "rbf";
  }
  return "unknown";
}

inline KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "polynomial" || name == "poly") return KernelFamily::polynomial;
  if (name == "rbf") return KernelFamily::rbf;
  throw InputError("unknown kernel family '" + name + "'");
}

// Kernel parameters.
//   linear:      K(u,v) = <u,v>
//   polynomial:  K(u,v) = (gamma * <u,v> + offset)^degree
//   rbf:         K(u,v) = exp(-|u-v|^2 / (2 * bandwidth^2))
struct KernelSpec {
  KernelFamily family = KernelFamily::polynomial;
  double gamma = 1.0;
  double offset = 0.0;
  int degree = 1;
  double bandwidth = 1.0;

  // Polynomial kernel with gamma = 1/k, offset 0, degree 1.
  static KernelSpec default_for_dimension(int k) {
    KernelSpec spec;
    spec.gamma = 1.0 / static_cast<double>(k);
    return spec;
  }

  void validate() const {
    require(gamma > 0.0 && std::isfinite(gamma), "kernel gamma must be positive");
    require(std::isfinite(offset), "kernel offset must be finite");
    if (family == KernelFamily::polynomial) require(degree >= 1, "polynomial degree must be >= 1");
    if (family == KernelFamily::rbf)
      require(bandwidth > 0.0 && std::isfinite(bandwidth), "rbf bandwidth must be positive");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

namespace detail {

inline double integer_power(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

template <typename U, typename V>
double kernel_eval_unchecked(const KernelSpec& spec, const U& u, const V& v) {
  switch (spec.family) {
    case KernelFamily::linear: return u.dot(v);
    case KernelFamily::polynomial:
      return integer_power(spec.gamma * u.dot(v) + spec.offset, spec.degree);
    case KernelFamily::rbf:
      return std::exp(-(u - v).squaredNorm() / (2.0 * spec.bandwidth * spec.bandwidth));
  }
  return 0.0;
}

}  // namespace detail

template <typename U, typename V>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<U>& u,
                   const Eigen::MatrixBase<V>& v) {
  if (u.size() != v.size())
    throw InputError("kernel_eval: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  return detail::kernel_eval_unchecked(spec, u.derived(), v.derived());
}

// Gram matrix between the rows of `left` and the rows of `right`.
inline Matrix cross_kernel(const KernelSpec& spec, const Matrix& left, const Matrix& right) {
  if (left.cols() != right.cols())
    throw InputError("cross_kernel: column mismatch (" + std::to_string(left.cols()) + " vs " +
                     std::to_string(right.cols()) + ")");
  Matrix gram(left.rows(), right.rows());
  for (Eigen::Index i = 0; i < left.rows(); ++i)
    for (Eigen::Index j = 0; j < right.rows(); ++j)
      gram(i, j) = detail::kernel_eval_unchecked(spec, left.row(i), right.row(j));
  return gram;
}

// Symmetric n x n Gram matrix of the rows of z. Only the upper triangle is
// evaluated; the lower one is mirrored so the result is exactly symmetric.
inline Matrix kernel_matrix(const KernelSpec& spec, const Matrix& z) {
  if (z.rows() < 1) throw InputError("kernel_matrix: need at least one row");
  const Eigen::Index n = z.rows();
  Matrix gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double value = detail::kernel_eval_unchecked(spec, z.row(i), z.row(j));
      gram(i, j) = value;
      gram(j, i) = value;
    }
  }
  return gram;
}

}  // namespace rsm
