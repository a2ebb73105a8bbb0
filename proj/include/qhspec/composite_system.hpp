#pragma once

// Two-factor composite systems: A = A₁⊗I + I⊗A₂ with the product metric
// η₁⊗η₂, biorthogonal eigenbases built from factor eigenvectors, and the
// finite-sum spectral expansions of kets and of A, A† acting on them.
//
// At finite dimension the closure of A₁⊗I + I⊗A₂ is the Kronecker sum
// itself. Continuous-measure expansions become sums over index pairs (l, m);
// colliding sums λ₁(l) + λ₂(m) keep their index pairs separate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qhspec/matrix_kernel.hpp"
#include "qhspec/metric_calculus.hpp"
#include "qhspec/sampling.hpp"

namespace qhspec {

/// Row-major reshape of a product-space vector into an n₁×n₂ matrix:
/// v[i·n₂ + j] = V(i, j).
inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index n1, Eigen::Index n2) {
  require_same_dim(v.size(), n1 * n2, "unvec");
  ComplexMatrix m(n1, n2);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n2; ++j) m(i, j) = v(i * n2 + j);
  return m;
}

inline ComplexVector vec(const ComplexMatrix& m) {
  ComplexVector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

/// (A₁⊗I + I⊗A₂)v evaluated factor-wise as vec(A₁V + VA₂ᵀ), never forming
/// the Kronecker matrices.
inline ComplexVector kron_sum_apply(const ComplexMatrix& a1, const ComplexMatrix& a2,
                                    const ComplexVector& v) {
  const ComplexMatrix m = unvec(v, a1.cols(), a2.cols());
  return vec(a1 * m + m * a2.transpose());
}

inline ComplexMatrix kron_sum(const ComplexMatrix& a1, const ComplexMatrix& a2) {
  const auto n1 = a1.rows(), n2 = a2.rows();
  return kron(a1, ComplexMatrix::Identity(n2, n2)) + kron(ComplexMatrix::Identity(n1, n1), a2);
}

class CompositeSystem {
 public:
  CompositeSystem(TruncatedOperator a1, TruncatedOperator a2, MetricOperator eta1,
                  MetricOperator eta2)
      : a1_(std::move(a1)),
        a2_(std::move(a2)),
        eta1_(std::move(eta1)),
        eta2_(std::move(eta2)),
        a_(make_a(a1_, a2_)),
        eta_(kron(eta1_.matrix(), eta2_.matrix()), kron(eta1_.inverse(), eta2_.inverse())) {
    require_same_dim(a1_.dim(), eta1_.dim(), "CompositeSystem factor 1");
    require_same_dim(a2_.dim(), eta2_.dim(), "CompositeSystem factor 2");
    residual_ = check_quasi_hermitian(a_, eta_).full_residual;
  }

  const TruncatedOperator& A1() const { return a1_; }
  const TruncatedOperator& A2() const { return a2_; }
  const MetricOperator& eta1() const { return eta1_; }
  const MetricOperator& eta2() const { return eta2_; }
  const TruncatedOperator& A() const { return a_; }
  const MetricOperator& eta() const { return eta_; }
  Eigen::Index dim() const { return a_.dim(); }

  /// ‖A†(η₁⊗η₂) − (η₁⊗η₂)A‖_F / (‖A‖_F‖η₁⊗η₂‖_F)
  double intertwining_residual() const { return residual_; }

 private:
  static TruncatedOperator make_a(const TruncatedOperator& a1, const TruncatedOperator& a2) {
    const auto n = a1.dim() * a2.dim();
    if (n > kMaxCompositeDim) {
      throw Error(ErrorCode::DimensionOverflow, "composite dimension " + std::to_string(n) +
                                                    " exceeds " + std::to_string(kMaxCompositeDim));
    }
    return TruncatedOperator(kron_sum(a1.matrix, a2.matrix), FockTruncation(n, 0));
  }

  TruncatedOperator a1_, a2_;
  MetricOperator eta1_, eta2_;
  TruncatedOperator a_;
  MetricOperator eta_;
  double residual_ = 0.0;
};

inline constexpr double kComposeInputTolerance = 1e-6;

inline CompositeSystem compose(const QuasiHermitianSystem& sys1, const QuasiHermitianSystem& sys2) {
  for (const auto* s : {&sys1, &sys2}) {
    if (!(s->interior_residual() <= kComposeInputTolerance)) {
      throw Error(ErrorCode::InputNotQuasiHermitian,
                  "factor interior residual " + std::to_string(s->interior_residual()) +
                      " exceeds 1e-6");
    }
  }
  const auto n = sys1.A().dim() * sys2.A().dim();
  if (n > kMaxCompositeDim) {
    throw Error(ErrorCode::DimensionOverflow, "composite dimension " + std::to_string(n));
  }
  return CompositeSystem(sys1.A(), sys2.A(), sys1.eta(), sys2.eta());
}

/// Max over `samples` random pairs of
/// |⟨φ,(η₁⊗η₂)ψ⟩ − Σ_ab σ_a τ_b ⟨x_a,x'_b⟩_η₁⟨y_a,y'_b⟩_η₂| / (‖φ‖_η‖ψ‖_η),
/// where the second route splits φ and ψ into product terms by SVD and only
/// uses factor-wise η-inner products.
inline double check_product_metric_equality(const MetricOperator& eta1, const MetricOperator& eta2, int samples,
                                std::uint64_t seed = 1) {
  const auto n1 = eta1.dim(), n2 = eta2.dim();
  const ComplexMatrix big = kron(eta1.matrix(), eta2.matrix());
  Rng rng(seed);

  struct ProductTerms {
    RealVector weights;
    ComplexMatrix left;   // columns in factor 1
    ComplexMatrix right;  // columns in factor 2
  };
  auto split = [&](const ComplexVector& v) {
    Eigen::JacobiSVD<ComplexMatrix> svd(unvec(v, n1, n2), Eigen::ComputeFullU | Eigen::ComputeFullV);
    return ProductTerms{svd.singularValues(), svd.matrixU(), svd.matrixV().conjugate()};
  };

  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const ComplexVector phi = random_vector(n1 * n2, rng);
    const ComplexVector psi = random_vector(n1 * n2, rng);
    const cplx direct = phi.dot(big * psi);

    const ProductTerms p = split(phi), q = split(psi);
    cplx factored(0.0, 0.0);
    for (Eigen::Index a = 0; a < p.weights.size(); ++a) {
      for (Eigen::Index b = 0; b < q.weights.size(); ++b) {
        factored += p.weights(a) * q.weights(b) *
                    eta_inner(eta1, p.left.col(a), q.left.col(b)) *
                    eta_inner(eta2, p.right.col(a), q.right.col(b));
      }
    }
    const double norm_phi = std::sqrt(std::abs(phi.dot(big * phi)));
    const double norm_psi = std::sqrt(std::abs(psi.dot(big * psi)));
    worst = std::max(worst, std::abs(direct - factored) / (norm_phi * norm_psi));
  }
  return worst;
}

/// Real eigenvalues with right eigenvectors normalized so that R†ηR = I.
/// Near-degenerate clusters are η-orthonormalized by Gram-Schmidt.
struct FactorBasis {
  RealVector values;
  ComplexMatrix right;
};

inline FactorBasis factor_basis(const ComplexMatrix& a, const MetricOperator& eta) {
  require_same_dim(a.rows(), eta.dim(), "factor_basis");
  const EigenPair ep = eig_general(a);
  const double tol = spectrum_reality_tolerance(a);
  if (ep.max_imag() > tol) {
    throw Error(ErrorCode::ComplexSpectrum,
                "factor spectrum has |Im λ| = " + std::to_string(ep.max_imag()));
  }
  FactorBasis fb{ep.values.real(), ep.right_vectors};
  const ComplexMatrix& g = eta.matrix();
  const Eigen::Index n = fb.values.size();
  const double cluster_tol = 1e-10 * std::max(1.0, a.norm());

  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index stop = start + 1;
    while (stop < n && fb.values(stop) - fb.values(stop - 1) <= cluster_tol) ++stop;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = start; k < stop; ++k) {
        for (Eigen::Index j = start; j < k; ++j) {
          fb.right.col(k) -= fb.right.col(j).dot(g * fb.right.col(k)) * fb.right.col(j);
        }
        const double nrm = std::sqrt(std::abs(fb.right.col(k).dot(g * fb.right.col(k))));
        if (!(nrm > 0.0)) throw Error(ErrorCode::DefectiveMatrix, "zero eta-norm eigenvector");
        fb.right.col(k) /= nrm;
      }
    }
    start = stop;
  }
  return fb;
}

struct BiorthogonalBasis {
  RealVector values;
  ComplexMatrix right_kets;  ///< columns |λ₁(l)⟩⊗|λ₂(m)⟩
  ComplexMatrix left_bras;   ///< columns (η₁⊗η₂)·right_kets
  std::vector<std::pair<Eigen::Index, Eigen::Index>> index_pairs;
  bool has_collisions = false;  ///< some λ₁(l)+λ₂(m) coincide

  Eigen::Index size() const { return values.size(); }

  /// ‖L†R − I‖_F
  double biorthogonality_residual() const {
    const auto n = size();
    return (left_bras.adjoint() * right_kets - ComplexMatrix::Identity(n, n)).norm();
  }
  /// ‖RL† − I‖_F
  double completeness_residual() const {
    const auto n = size();
    return (right_kets * left_bras.adjoint() - ComplexMatrix::Identity(n, n)).norm();
  }
};

inline BiorthogonalBasis biorthogonal_basis(const CompositeSystem& cs) {
  const FactorBasis f1 = factor_basis(cs.A1().matrix, cs.eta1());
  const FactorBasis f2 = factor_basis(cs.A2().matrix, cs.eta2());
  const auto n1 = f1.values.size(), n2 = f2.values.size();
  const ComplexMatrix l1 = cs.eta1().matrix() * f1.right;
  const ComplexMatrix l2 = cs.eta2().matrix() * f2.right;

  BiorthogonalBasis b;
  b.values.resize(n1 * n2);
  b.right_kets.resize(n1 * n2, n1 * n2);
  b.left_bras.resize(n1 * n2, n1 * n2);
  b.index_pairs.reserve(static_cast<std::size_t>(n1 * n2));
  // (η₁⊗η₂)(r₁⊗r₂) = (η₁r₁)⊗(η₂r₂), so the left bras are assembled per factor.
  for (Eigen::Index l = 0; l < n1; ++l) {
    for (Eigen::Index m = 0; m < n2; ++m) {
      const Eigen::Index k = l * n2 + m;
      b.values(k) = f1.values(l) + f2.values(m);
      b.right_kets.col(k) = kron(ComplexVector(f1.right.col(l)), ComplexVector(f2.right.col(m)));
      b.left_bras.col(k) = kron(ComplexVector(l1.col(l)), ComplexVector(l2.col(m)));
      b.index_pairs.emplace_back(l, m);
    }
  }
  std::vector<double> sorted(b.values.data(), b.values.data() + b.values.size());
  std::sort(sorted.begin(), sorted.end());
  const double tol = 1e-10 * std::max(1.0, cs.A().matrix.norm());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - sorted[i - 1] <= tol) b.has_collisions = true;
  }
  return b;
}

/// c_k = ⟨λ_k|_η v, i.e. left_bras[k]†v.
inline ComplexVector expand_ket(const BiorthogonalBasis& basis, const ComplexVector& v) {
  require_same_dim(v.size(), basis.left_bras.rows(), "expand_ket");
  return basis.left_bras.adjoint() * v;
}

inline ComplexVector reconstruct_ket(const BiorthogonalBasis& basis, const ComplexVector& c) {
  require_same_dim(c.size(), basis.right_kets.cols(), "reconstruct_ket");
  return basis.right_kets * c;
}

/// Av = Σ λ_k (L_k†v) R_k, or A†v = Σ λ_k (R_k†v) L_k.
inline ComplexVector apply_via_expansion(const BiorthogonalBasis& basis, const ComplexVector& v,
                                         bool use_adjoint) {
  require_same_dim(v.size(), basis.right_kets.rows(), "apply_via_expansion");
  const ComplexVector lam = basis.values.cast<cplx>();
  if (!use_adjoint) {
    const ComplexVector c = basis.left_bras.adjoint() * v;
    return basis.right_kets * lam.cwiseProduct(c);
  }
  const ComplexVector c = basis.right_kets.adjoint() * v;
  return basis.left_bras * lam.cwiseProduct(c);
}

struct AdditivityReport {
  double max_discrepancy = 0.0;  ///< after sorted matching
  double max_imag = 0.0;         ///< of the composite eigenvalues
};

/// Compares eig_general of the full Kronecker sum with all pairwise sums
/// of factor eigenvalues.
inline AdditivityReport spectrum_additivity(const CompositeSystem& cs) {
  const EigenPair full = eig_general(cs.A().matrix);
  const EigenPair e1 = eig_general(cs.A1().matrix);
  const EigenPair e2 = eig_general(cs.A2().matrix);
  std::vector<double> sums, direct;
  for (Eigen::Index l = 0; l < e1.size(); ++l)
    for (Eigen::Index m = 0; m < e2.size(); ++m)
      sums.push_back(e1.values(l).real() + e2.values(m).real());
  for (Eigen::Index k = 0; k < full.size(); ++k) direct.push_back(full.values(k).real());
  std::sort(sums.begin(), sums.end());
  std::sort(direct.begin(), direct.end());
  AdditivityReport rep;
  rep.max_imag = std::max({full.max_imag(), e1.max_imag(), e2.max_imag()});
  for (std::size_t i = 0; i < sums.size(); ++i) {
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(sums[i] - direct[i]));
  }
  return rep;
}

}  // namespace qhspec
