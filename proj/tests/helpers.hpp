#pragma once

#include "rsm/random.hpp"
#include "rsm/kernels.hpp"

namespace testing_helpers {

inline rsm::Matrix normal_matrix(rsm::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  rsm::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline rsm::Vector normal_vector(rsm::Rng& rng, Eigen::Index size) {
  rsm::Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace testing_helpers
