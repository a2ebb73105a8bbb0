#pragma once

// Dense complex matrix primitives: eigensolvers with left/right vectors,
// matrix exponentials, positivity certification and Kronecker products.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qhspec/error.hpp"

namespace qhspec {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Eigen::Index kMaxSingleDim = 512;
inline constexpr Eigen::Index kMaxCompositeDim = 4096;

inline double frobenius(const ComplexMatrix& m) { return m.norm(); }

inline bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

inline void require_square(const ComplexMatrix& m, const char* who) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw Error(ErrorCode::NotSquare, std::string(who) + ": matrix is " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* who) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(who) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// ‖M − M†‖_F / 2, the anti-Hermitian part's norm.
inline double hermiticity_defect(const ComplexMatrix& m) {
  return 0.5 * (m - m.adjoint()).norm();
}

inline bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12) {
  return hermiticity_defect(m) <= rel_tol * std::max(m.norm(), 1e-300);
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

inline void require_hermitian(const ComplexMatrix& m, const char* who) {
  if (!is_hermitian(m)) {
    throw Error(ErrorCode::NotHermitian,
                std::string(who) + ": anti-Hermitian part " + std::to_string(hermiticity_defect(m)) +
                    " exceeds 1e-12 * |M|_F = " + std::to_string(1e-12 * m.norm()));
  }
}

struct EigenPair {
  ComplexVector values;
  ComplexMatrix right_vectors;  ///< unit columns, largest entry real-positive
  ComplexMatrix left_vectors;   ///< columns of (right_vectors^{-1})^†
  double condition_estimate = 1.0;

  Eigen::Index size() const { return values.size(); }

  /// ‖L†R − I‖_F
  double biorthogonality_residual() const {
    const auto n = right_vectors.cols();
    return (left_vectors.adjoint() * right_vectors - ComplexMatrix::Identity(n, n)).norm();
  }

  double max_imag() const {
    return values.size() ? values.imag().cwiseAbs().maxCoeff() : 0.0;
  }
};

namespace detail {

/// Rotate a column so that its largest-magnitude entry is real and positive,
/// and scale it to unit Euclidean norm. Returns the applied factor s
/// (column_new = s * column_old).
inline cplx fix_phase(Eigen::Ref<ComplexVector> col) {
  const double nrm = col.norm();
  if (nrm == 0.0) return cplx(1.0, 0.0);
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    const double a = std::abs(col(i));
    // strict comparison with a relative slack keeps ties on the lowest index
    if (a > best * (1.0 + 1e-12)) {
      best = a;
      arg = i;
    }
  }
  const cplx phase = std::conj(col(arg)) / std::abs(col(arg));
  const cplx s = phase / nrm;
  col *= s;
  col(arg) = cplx(std::abs(col(arg)), 0.0);
  return s;
}

/// Parlett-Reinsch diagonal balancing with radix 2. Returns d such that
/// diag(d)^{-1} M diag(d) has comparable off-diagonal row and column norms.
inline RealVector balance(ComplexMatrix& m) {
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  const Eigen::Index n = m.rows();
  RealVector d = RealVector::Ones(n);
  bool done = false;
  int sweeps = 0;
  while (!done && sweeps < 1000) {
    done = true;
    ++sweeps;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        d(i) *= f;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
  return d;
}

inline void sort_by_value(ComplexVector& values, ComplexMatrix& right, ComplexMatrix& left) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values(a).real() != values(b).real()) return values(a).real() < values(b).real();
    return values(a).imag() < values(b).imag();
  });
  ComplexVector v(n);
  ComplexMatrix r(right.rows(), n), l(left.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    v(k) = values(order[static_cast<std::size_t>(k)]);
    r.col(k) = right.col(order[static_cast<std::size_t>(k)]);
    l.col(k) = left.col(order[static_cast<std::size_t>(k)]);
  }
  values = std::move(v);
  right = std::move(r);
  left = std::move(l);
}

}  // namespace detail

/// Hermitian eigensolve. Values ascending, vectors unitary and phase-fixed.
inline EigenPair eig_hermitian(const ComplexMatrix& m) {
  require_square(m, "eig_hermitian");
  require_hermitian(m, "eig_hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitian_part(m));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "eig_hermitian: QR iteration did not converge");
  }
  EigenPair out;
  out.values = solver.eigenvalues().cast<cplx>();
  out.right_vectors = solver.eigenvectors();
  for (Eigen::Index k = 0; k < out.right_vectors.cols(); ++k) {
    detail::fix_phase(out.right_vectors.col(k));
  }
  out.left_vectors = out.right_vectors;
  out.condition_estimate = 1.0;
  return out;
}

/// General diagonalization M = R Λ L†, with balancing ahead of the complex
/// Schur step. condition_estimate = ‖R‖_F‖L‖_F / N, which is 1 for normal
/// matrices and grows with eigenvector non-orthogonality.
inline EigenPair eig_general(const ComplexMatrix& m) {
  require_square(m, "eig_general");
  if (!all_finite(m)) throw Error(ErrorCode::NoConvergence, "eig_general: non-finite input");
  const Eigen::Index n = m.rows();

  ComplexMatrix balanced = m;
  const RealVector d = detail::balance(balanced);

  Eigen::ComplexEigenSolver<ComplexMatrix> solver(balanced, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "eig_general: complex Schur iteration did not converge");
  }
  ComplexMatrix right_b = solver.eigenvectors();
  Eigen::PartialPivLU<ComplexMatrix> lu(right_b);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw Error(ErrorCode::DefectiveMatrix,
                "eig_general: eigenvector matrix is numerically singular (rcond " +
                    std::to_string(rcond) + ")");
  }
  ComplexMatrix left_b = lu.inverse().adjoint();

  EigenPair out;
  out.values = solver.eigenvalues();
  out.right_vectors = d.asDiagonal() * right_b;
  out.left_vectors = d.cwiseInverse().asDiagonal() * left_b;
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx s = detail::fix_phase(out.right_vectors.col(k));
    out.left_vectors.col(k) /= std::conj(s);
  }
  detail::sort_by_value(out.values, out.right_vectors, out.left_vectors);
  out.condition_estimate =
      std::max(1.0, out.right_vectors.norm() * out.left_vectors.norm() / static_cast<double>(n));

  const double bio = out.biorthogonality_residual();
  if (!(bio <= 1e-6 * out.condition_estimate * static_cast<double>(n))) {
    throw Error(ErrorCode::DefectiveMatrix,
                "eig_general: biorthogonality residual " + std::to_string(bio));
  }
  return out;
}

/// Scaling-and-squaring Padé exponential.
inline ComplexMatrix expm_pade(const ComplexMatrix& m) {
  require_square(m, "expm");
  ComplexMatrix out = m.exp();
  if (!all_finite(out)) throw Error(ErrorCode::Overflow, "expm: result overflowed");
  return out;
}

/// exp(M) = V exp(Λ) V† for Hermitian M.
inline ComplexMatrix expm_hermitian(const ComplexMatrix& m) {
  const EigenPair ep = eig_hermitian(m);
  const RealVector lam = ep.values.real();
  if (lam.maxCoeff() > 700.0) throw Error(ErrorCode::Overflow, "expm: eigenvalue above 700");
  const ComplexVector e = lam.array().exp().matrix().cast<cplx>();
  ComplexMatrix out = ep.right_vectors * e.asDiagonal() * ep.right_vectors.adjoint();
  out = hermitian_part(out);
  if (!all_finite(out)) throw Error(ErrorCode::Overflow, "expm: result overflowed");
  return out;
}

/// Hermitian inputs take the eigendecomposition path (exactly Hermitian
/// output); everything else goes through Padé.
inline ComplexMatrix expm(const ComplexMatrix& m) {
  require_square(m, "expm");
  if (is_hermitian(m)) return expm_hermitian(m);
  return expm_pade(m);
}

/// Positive square root of a Hermitian positive-definite matrix.
inline ComplexMatrix sqrtm_positive(const ComplexMatrix& m) {
  const EigenPair ep = eig_hermitian(m);
  const RealVector lam = ep.values.real();
  if (!(lam.minCoeff() > 0.0)) {
    throw Error(ErrorCode::NotPositiveDefinite, "sqrtm_positive: non-positive eigenvalue");
  }
  const ComplexVector r = lam.cwiseSqrt().cast<cplx>();
  return hermitian_part(ep.right_vectors * r.asDiagonal() * ep.right_vectors.adjoint());
}

struct PositivityReport {
  bool is_positive = false;
  double min_eigenvalue_estimate = 0.0;
};

inline PositivityReport cholesky_positivity(const ComplexMatrix& m) {
  require_square(m, "cholesky_positivity");
  require_hermitian(m, "cholesky_positivity");
  const ComplexMatrix h = hermitian_part(m);
  PositivityReport rep;
  Eigen::LLT<ComplexMatrix> llt(h);
  rep.is_positive = llt.info() == Eigen::Success;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  rep.min_eigenvalue_estimate = solver.eigenvalues().minCoeff();
  return rep;
}

/// Standard Kronecker product: (A⊗B)[i·p + k, j·q + l] = A[i,j]·B[k,l].
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          Eigen::Index cap = kMaxCompositeDim) {
  const Eigen::Index rows = a.rows() * b.rows();
  const Eigen::Index cols = a.cols() * b.cols();
  if (rows > cap || cols > cap) {
    throw Error(ErrorCode::DimensionOverflow, "kron: product dimension " + std::to_string(rows) +
                                                  "x" + std::to_string(cols) + " exceeds cap " +
                                                  std::to_string(cap));
  }
  ComplexMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexVector kron(const ComplexVector& x, const ComplexVector& y) {
  ComplexVector out(x.size() * y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.segment(i * y.size(), y.size()) = x(i) * y;
  return out;
}

}  // namespace qhspec
