#pragma once

// Positive metrics η, the η-inner product ⟨φ,ψ⟩_η = ⟨φ,ηψ⟩ and the
// intertwining test A†η = ηA. metric_from_spectrum is the brute-force
// construction η = (SS†)⁻¹ = LL† from a biorthogonal eigendecomposition,
// used as the reference every closed-form metric is compared against.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "qhspec/fock_algebra.hpp"
#include "qhspec/matrix_kernel.hpp"

namespace qhspec {

class MetricOperator {
 public:
  /// Certifies positivity by Cholesky and forms the inverse from the factor.
  explicit MetricOperator(const ComplexMatrix& eta) {
    init_matrix(eta);
    inverse_ = hermitian_part(llt_.solve(ComplexMatrix::Identity(dim(), dim())));
    finish();
  }

  /// Same, with an inverse that is already known in closed form
  /// (e.g. RR† for η = LL†, or a Kronecker product of factor inverses).
  MetricOperator(const ComplexMatrix& eta, const ComplexMatrix& inverse) {
    init_matrix(eta);
    require_same_dim(inverse.rows(), dim(), "MetricOperator inverse");
    require_square(inverse, "MetricOperator inverse");
    inverse_ = hermitian_part(inverse);
    finish();
  }

  const ComplexMatrix& matrix() const { return matrix_; }
  const ComplexMatrix& inverse() const { return inverse_; }
  ComplexMatrix cholesky_factor() const { return llt_.matrixL(); }
  Eigen::Index dim() const { return matrix_.rows(); }

  /// ‖η·η⁻¹ − I‖_F as constructed.
  double inverse_residual() const { return inverse_residual_; }
  /// ‖η‖_F‖η⁻¹‖_F / N, at least 1.
  double condition_estimate() const { return condition_; }

 private:
  void init_matrix(const ComplexMatrix& eta) {
    require_square(eta, "MetricOperator");
    require_hermitian(eta, "MetricOperator");
    if (!all_finite(eta)) throw Error(ErrorCode::NotPositiveDefinite, "non-finite metric entries");
    matrix_ = hermitian_part(eta);
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
    }
  }

  void finish() {
    const auto n = static_cast<double>(dim());
    inverse_residual_ = (matrix_ * inverse_ - ComplexMatrix::Identity(dim(), dim())).norm();
    condition_ = std::max(1.0, matrix_.norm() * inverse_.norm() / n);
    // Tolerance 1e-10·N, relaxed by the metric's own conditioning.
    if (!(inverse_residual_ <= 1e-10 * n * condition_)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "metric inverse residual " + std::to_string(inverse_residual_) +
                      " (numerically singular metric)");
    }
  }

  ComplexMatrix matrix_;
  ComplexMatrix inverse_;
  Eigen::LLT<ComplexMatrix> llt_;
  double inverse_residual_ = 0.0;
  double condition_ = 1.0;
};

struct ResidualReport {
  double full_residual = 0.0;
  double interior_residual = 0.0;
};

/// ⟨φ, ηψ⟩, conjugate-linear in φ.
inline cplx eta_inner(const MetricOperator& eta, const ComplexVector& phi, const ComplexVector& psi) {
  require_same_dim(phi.size(), eta.dim(), "eta_inner");
  require_same_dim(psi.size(), eta.dim(), "eta_inner");
  return phi.dot(eta.matrix() * psi);
}

/// Relative residuals of A†η − ηA, normalized by ‖A‖_F‖η‖_F, over the full
/// matrix and over the interior block of A's truncation.
inline ResidualReport check_quasi_hermitian(const TruncatedOperator& a, const ComplexMatrix& eta) {
  require_same_dim(a.dim(), eta.rows(), "check_quasi_hermitian");
  require_square(eta, "check_quasi_hermitian");
  const ComplexMatrix r = a.matrix.adjoint() * eta - eta * a.matrix;
  const double scale = a.matrix.norm() * eta.norm();
  ResidualReport rep;
  if (scale == 0.0) return rep;
  rep.full_residual = r.norm() / scale;
  rep.interior_residual = a.interior(r).norm() / scale;
  return rep;
}

inline ResidualReport check_quasi_hermitian(const TruncatedOperator& a, const MetricOperator& eta) {
  return check_quasi_hermitian(a, eta.matrix());
}

inline double spectrum_reality_tolerance(const ComplexMatrix& a) { return 1e-8 * a.norm(); }

/// η = LL† with L the left eigenvectors paired to unit, phase-fixed right
/// eigenvectors; η⁻¹ = RR†. Requires a real spectrum.
inline MetricOperator metric_from_spectrum(const ComplexMatrix& a) {
  const EigenPair ep = eig_general(a);
  const double tol = spectrum_reality_tolerance(a);
  if (ep.max_imag() > tol) {
    throw Error(ErrorCode::ComplexSpectrum, "metric_from_spectrum: max |Im λ| = " +
                                                std::to_string(ep.max_imag()) + " exceeds " +
                                                std::to_string(tol));
  }
  const ComplexMatrix eta = hermitian_part(ep.left_vectors * ep.left_vectors.adjoint());
  const ComplexMatrix inv = hermitian_part(ep.right_vectors * ep.right_vectors.adjoint());
  return MetricOperator(eta, inv);
}

inline MetricOperator metric_from_spectrum(const TruncatedOperator& a) {
  return metric_from_spectrum(a.matrix);
}

/// A♯ = η⁻¹A†η, the adjoint with respect to ⟨·,·⟩_η.
inline TruncatedOperator eta_adjoint(const TruncatedOperator& a, const MetricOperator& eta) {
  require_same_dim(a.dim(), eta.dim(), "eta_adjoint");
  return TruncatedOperator(eta.inverse() * a.matrix.adjoint() * eta.matrix(), a.trunc);
}

class QuasiHermitianSystem {
 public:
  QuasiHermitianSystem(TruncatedOperator a, MetricOperator eta)
      : a_(std::move(a)), eta_(std::move(eta)) {
    require_same_dim(a_.dim(), eta_.dim(), "QuasiHermitianSystem");
    residual_ = check_quasi_hermitian(a_, eta_);
  }

  /// ρ must be a positive square root of η within 1e-10‖η‖_F.
  QuasiHermitianSystem(TruncatedOperator a, MetricOperator eta, ComplexMatrix rho)
      : QuasiHermitianSystem(std::move(a), std::move(eta)) {
    require_same_dim(rho.rows(), eta_.dim(), "QuasiHermitianSystem rho");
    require_square(rho, "QuasiHermitianSystem rho");
    const double d = (rho * rho - eta_.matrix()).norm();
    if (!(d <= 1e-10 * eta_.matrix().norm())) {
      throw Error(ErrorCode::InvalidParams,
                  "rho^2 differs from eta by " + std::to_string(d) + " (Frobenius)");
    }
    rho_ = std::move(rho);
  }

  /// Builds η = ρ² from a Hermitian positive root.
  static QuasiHermitianSystem from_rho(TruncatedOperator a, const ComplexMatrix& rho) {
    require_hermitian(rho, "from_rho");
    const ComplexMatrix r = hermitian_part(rho);
    ComplexMatrix eta = hermitian_part(r * r);
    return QuasiHermitianSystem(std::move(a), MetricOperator(eta), r);
  }

  const TruncatedOperator& A() const { return a_; }
  const MetricOperator& eta() const { return eta_; }
  const std::optional<ComplexMatrix>& rho() const { return rho_; }
  double intertwining_residual() const { return residual_.full_residual; }
  double interior_residual() const { return residual_.interior_residual; }
  const ResidualReport& residuals() const { return residual_; }

 private:
  TruncatedOperator a_;
  MetricOperator eta_;
  std::optional<ComplexMatrix> rho_;
  ResidualReport residual_;
};

struct HermitianCounterpart {
  TruncatedOperator h;
  double full_hermiticity = 0.0;      ///< ‖h − h†‖_F / ‖h‖_F
  double interior_hermiticity = 0.0;  ///< same, restricted to the interior block
};

inline double relative_hermiticity(const ComplexMatrix& block, double scale) {
  return scale == 0.0 ? 0.0 : (block - block.adjoint()).norm() / scale;
}

/// h_ρ = ρAρ⁻¹ with the Hermiticity residual of the result.
inline HermitianCounterpart hermitian_counterpart(const QuasiHermitianSystem& sys) {
  if (!sys.rho()) throw Error(ErrorCode::MissingRho, "hermitian_counterpart needs rho");
  const ComplexMatrix& rho = *sys.rho();
  const ComplexMatrix rho_a = rho * sys.A().matrix;
  // hρ = ρA, solved as ρᵀhᵀ = (ρA)ᵀ
  const ComplexMatrix h = rho.transpose().partialPivLu().solve(rho_a.transpose()).transpose();
  HermitianCounterpart out{TruncatedOperator(h, sys.A().trunc), 0.0, 0.0};
  const double scale = h.norm();
  out.full_hermiticity = relative_hermiticity(h, scale);
  out.interior_hermiticity = relative_hermiticity(out.h.interior(h), scale);
  return out;
}

}  // namespace qhspec
