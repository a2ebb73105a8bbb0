#pragma once

#include <cstdint>
#include <random>

#include "qhspec/matrix_kernel.hpp"

namespace qhspec {

using Rng = std::mt19937_64;

inline ComplexVector random_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v(i) = cplx(re, im);
  }
  return v;
}

inline ComplexMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      m(i, j) = cplx(re, im);
    }
  }
  return m;
}

/// G G†/n + I: Hermitian with spectrum bounded below by 1.
inline ComplexMatrix random_positive_matrix(Eigen::Index n, Rng& rng) {
  const ComplexMatrix g = random_matrix(n, n, rng);
  ComplexMatrix p = g * g.adjoint() / static_cast<double>(n) + ComplexMatrix::Identity(n, n);
  return 0.5 * (p + p.adjoint());
}

}  // namespace qhspec
