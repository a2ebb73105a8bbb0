#pragma once

// Bras and kets as coordinate vectors, and the extension of an operator to
// them. Convention: the ket-side extension acts with the matrix of A, the
// bra-side extension with A† from the right, so that
//   |Aφ⟩ = Â|φ⟩,   ⟨Aφ| = ⟨φ|Â,   ⟨φ|Â|ψ⟩ pairs to ⟨Aφ,ψ⟩
// hold identically. The η-bra and η-ket of φ are ⟨φ|η̂ and η̂|φ⟩.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "qhspec/composite_system.hpp"
#include "qhspec/metric_calculus.hpp"
#include "qhspec/sampling.hpp"

namespace qhspec {

struct Ket {
  ComplexVector coords;
  static Ket of(const ComplexVector& v) { return Ket{v}; }
};

struct Bra {
  Eigen::RowVectorXcd coords;
  /// ⟨v| = (|v⟩)†
  static Bra of(const ComplexVector& v) { return Bra{v.adjoint()}; }
};

inline cplx pair(const Bra& b, const Ket& k) {
  require_same_dim(b.coords.size(), k.coords.size(), "pair");
  return (b.coords * k.coords)(0, 0);
}

inline Ket extend_on_ket(const ComplexMatrix& a, const Ket& k) {
  require_same_dim(a.cols(), k.coords.size(), "extend_on_ket");
  return Ket{a * k.coords};
}

inline Bra extend_on_bra(const ComplexMatrix& a, const Bra& b) {
  require_same_dim(a.cols(), b.coords.size(), "extend_on_bra");
  return Bra{b.coords * a.adjoint()};
}

inline Ket extend_on_ket(const TruncatedOperator& a, const Ket& k) { return extend_on_ket(a.matrix, k); }
inline Bra extend_on_bra(const TruncatedOperator& a, const Bra& b) { return extend_on_bra(a.matrix, b); }

struct EtaHatResiduals {
  double bra_forward = 0.0;   ///< ⟨φ|η̂ vs ⟨φ|_η
  double ket_forward = 0.0;   ///< η̂|φ⟩ vs |φ⟩_η
  double bra_inverse = 0.0;   ///< ⟨φ|_η η̂⁻¹ vs ⟨φ|
  double ket_inverse = 0.0;   ///< η̂⁻¹|φ⟩_η vs |φ⟩

  double max() const { return std::max({bra_forward, ket_forward, bra_inverse, ket_inverse}); }
};

/// The η-bra ⟨φ|_η and η-ket |φ⟩_η are built from η-inner products against
/// the coordinate basis; the operator route multiplies by η or η⁻¹.
/// Residuals are relative to ‖η‖_F‖φ‖ (forward) and ‖φ‖ (inverse).
inline EtaHatResiduals eta_hat_relations_check(const MetricOperator& eta, const ComplexVector& v) {
  require_same_dim(v.size(), eta.dim(), "eta_hat_relations_check");
  const Eigen::Index n = v.size();
  Eigen::RowVectorXcd eta_bra(n);
  ComplexVector eta_ket(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ComplexVector e = ComplexVector::Unit(n, j);
    eta_bra(j) = eta_inner(eta, v, e);
    eta_ket(j) = eta_inner(eta, e, v);
  }
  const Bra bra = Bra::of(v);
  const Ket ket = Ket::of(v);
  const double vn = std::max(v.norm(), 1e-300);
  const double scale = std::max(eta.matrix().norm(), 1e-300) * vn;

  EtaHatResiduals r;
  r.bra_forward = (bra.coords * eta.matrix() - eta_bra).norm() / scale;
  r.ket_forward = (eta.matrix() * ket.coords - eta_ket).norm() / scale;
  r.bra_inverse = (eta_bra * eta.inverse() - bra.coords).norm() / vn;
  r.ket_inverse = (eta.inverse() * eta_ket - ket.coords).norm() / vn;
  return r;
}

/// Â on random kets and bras, evaluated at random φ,
/// once with the Kronecker-sum matrix and once factor-wise as Â₁⊗Î + Î⊗Â₂.
/// Returns the max of |Δ| / (‖A‖_F‖f‖‖φ‖).
inline double check_extension_decomposition(const CompositeSystem& cs, int samples, std::uint64_t seed = 1) {
  const ComplexMatrix& a = cs.A().matrix;
  const ComplexMatrix& a1 = cs.A1().matrix;
  const ComplexMatrix& a2 = cs.A2().matrix;
  const Eigen::Index n = cs.dim();
  const double an = std::max(a.norm(), 1e-300);
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const ComplexVector f = random_vector(n, rng);
    const ComplexVector phi = random_vector(n, rng);
    const double scale = an * f.norm() * phi.norm();

    const cplx ket_direct = pair(Bra::of(phi), extend_on_ket(a, Ket::of(f)));
    const cplx ket_factor = pair(Bra::of(phi), Ket::of(kron_sum_apply(a1, a2, f)));

    const cplx bra_direct = pair(extend_on_bra(a, Bra::of(f)), Ket::of(phi));
    const Eigen::RowVectorXcd bra_rows = kron_sum_apply(a1, a2, f).adjoint();
    const cplx bra_factor = pair(Bra{bra_rows}, Ket::of(phi));

    worst = std::max({worst, std::abs(ket_direct - ket_factor) / scale,
                      std::abs(bra_direct - bra_factor) / scale});
  }
  return worst;
}

struct SymmetricRelationReport {
  double symmetric_residual = 0.0;        ///< ⟨φ|Â†|ψ⟩ vs ⟨φ|η̂Âη̂⁻¹|ψ⟩
  double adjoint_decomposition = 0.0;     ///< Â† vs Â₁†⊗Î + Î⊗Â₂†
  double max() const { return std::max(symmetric_residual, adjoint_decomposition); }
};

inline constexpr double kSymmetricRelationInputTolerance = 1e-6;

/// ⟨φ|Â†|ψ⟩ against ⟨φ|η̂Âη̂⁻¹|ψ⟩ over random φ, ψ, relative to
/// ‖A‖_F‖φ‖‖ψ‖.
inline double symmetric_relation_residual(const ComplexMatrix& a, const MetricOperator& eta, int samples,
                                   std::uint64_t seed) {
  require_same_dim(a.rows(), eta.dim(), "check_symmetric_relation");
  const double an = std::max(a.norm(), 1e-300);
  const ComplexMatrix a_dag = a.adjoint();
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const ComplexVector phi = random_vector(a.rows(), rng);
    const ComplexVector psi = random_vector(a.rows(), rng);
    const cplx lhs = pair(Bra::of(phi), extend_on_ket(a_dag, Ket::of(psi)));
    const Ket step = extend_on_ket(eta.inverse(), Ket::of(psi));
    const Ket rhs_ket = extend_on_ket(eta.matrix(), extend_on_ket(a, step));
    const cplx rhs = pair(Bra::of(phi), rhs_ket);
    worst = std::max(worst, std::abs(lhs - rhs) / (an * phi.norm() * psi.norm()));
  }
  return worst;
}

inline SymmetricRelationReport check_symmetric_relation(const CompositeSystem& cs, int samples,
                                         std::uint64_t seed = 1) {
  if (!(cs.intertwining_residual() <= kSymmetricRelationInputTolerance)) {
    throw Error(ErrorCode::InputNotQuasiHermitian,
                "composite intertwining residual " + std::to_string(cs.intertwining_residual()));
  }
  SymmetricRelationReport rep;
  rep.symmetric_residual = symmetric_relation_residual(cs.A().matrix, cs.eta(), samples, seed);

  const ComplexMatrix a_dag = cs.A().matrix.adjoint();
  const ComplexMatrix a1_dag = cs.A1().matrix.adjoint();
  const ComplexMatrix a2_dag = cs.A2().matrix.adjoint();
  const double an = std::max(a_dag.norm(), 1e-300);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int s = 0; s < samples; ++s) {
    const ComplexVector psi = random_vector(cs.dim(), rng);
    const ComplexVector d = a_dag * psi - kron_sum_apply(a1_dag, a2_dag, psi);
    rep.adjoint_decomposition = std::max(rep.adjoint_decomposition, d.norm() / (an * psi.norm()));
  }
  return rep;
}

/// Single-system form (no factor decomposition to verify).
inline double check_symmetric_relation(const QuasiHermitianSystem& sys, int samples, std::uint64_t seed = 1) {
  if (!(sys.intertwining_residual() <= kSymmetricRelationInputTolerance)) {
    throw Error(ErrorCode::InputNotQuasiHermitian,
                "intertwining residual " + std::to_string(sys.intertwining_residual()));
  }
  return symmetric_relation_residual(sys.A().matrix, sys.eta(), samples, seed);
}

}  // namespace qhspec
