#pragma once

// Position-space realization: normalized Hermite functions, Gauss-Hermite
// quadrature, the deformed eigenfunctions Ψ_l = ρ⁻¹φ_l and composite
// wavefunction expansions. Metric-weighted quantities are evaluated in Fock
// coefficient space, where they are exact; position space is only used for
// η-free integrals.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "qhspec/composite_system.hpp"
#include "qhspec/metric_calculus.hpp"
#include "qhspec/swanson_model.hpp"

namespace qhspec {

/// φ_0(t) … φ_lmax(t) at unit scale by the normalized three-term recurrence
///   φ_{k+1} = √(2/(k+1)) t φ_k − √(k/(k+1)) φ_{k−1},
/// carrying the Gaussian factor as a separate exponent so that neither
/// e^{−t²/2} nor the polynomial part over/underflows on its own.
inline std::vector<double> hermite_function_table(int lmax, double t) {
  if (lmax < 0) throw Error(ErrorCode::NegativeLevel, "level " + std::to_string(lmax));
  std::vector<double> raw(static_cast<std::size_t>(lmax) + 1);
  std::vector<double> log_scale(raw.size());
  constexpr double big = 1e250;
  const double log_big = std::log(big);
  double scale = -0.5 * t * t;

  double prev = 0.0;
  double cur = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  raw[0] = cur;
  log_scale[0] = scale;
  for (int k = 0; k < lmax; ++k) {
    const double kk = static_cast<double>(k);
    double next = std::sqrt(2.0 / (kk + 1.0)) * t * cur - std::sqrt(kk / (kk + 1.0)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > big) {
      cur /= big;
      prev /= big;
      scale += log_big;
    }
    raw[static_cast<std::size_t>(k) + 1] = cur;
    log_scale[static_cast<std::size_t>(k) + 1] = scale;
  }
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    out[k] = raw[k] == 0.0 ? 0.0
                           : std::copysign(std::exp(std::log(std::abs(raw[k])) + log_scale[k]), raw[k]);
  }
  return out;
}

/// √(2^{−l}/(l!·L·√π))·e^{−x²/(2L²)}·H_l(x/L)
inline double hermite_function(int l, double x, double length_scale) {
  if (l < 0) throw Error(ErrorCode::NegativeLevel, "level " + std::to_string(l));
  if (!(length_scale > 0.0)) throw Error(ErrorCode::NonpositiveScale, "length scale must be > 0");
  return hermite_function_table(l, x / length_scale).back() * (1.0 / std::sqrt(length_scale));
}

/// Gauss-Hermite rule for ∫ f(x) dx. `function_weights` are w_i·e^{x_i²},
/// so Σ_i function_weights[i]·φ_l(x_i)φ_m(x_i) is exact for l + m < 2n.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> function_weights;
};

namespace detail {

inline GaussHermiteRule compute_gauss_hermite(int n) {
  RealVector diag = RealVector::Zero(n);
  RealVector sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "Gauss-Hermite Jacobi eigensolve");
  }
  GaussHermiteRule rule;
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()(i);
    // Newton polish on φ_n; φ_n' = √(2n)φ_{n−1} − xφ_n and φ_n(x) = 0 at a node.
    for (int it = 0; it < 3; ++it) {
      const auto tab = hermite_function_table(n, x);
      const double fn = tab[static_cast<std::size_t>(n)];
      const double dfn = std::sqrt(2.0 * n) * tab[static_cast<std::size_t>(n) - 1] - x * fn;
      if (dfn == 0.0) break;
      x -= fn / dfn;
    }
    const auto tab = hermite_function_table(n - 1, x);
    double christoffel = 0.0;
    for (double v : tab) christoffel += v * v;
    rule.nodes.push_back(x);
    rule.function_weights.push_back(1.0 / christoffel);
  }
  return rule;
}

}  // namespace detail

/// Rules are computed once per node count and shared.
inline std::shared_ptr<const GaussHermiteRule> gauss_hermite(int n) {
  if (n < 1) throw Error(ErrorCode::InsufficientNodes, "node count must be positive");
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const GaussHermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto rule = std::make_shared<const GaussHermiteRule>(detail::compute_gauss_hermite(n));
  cache.emplace(n, rule);
  return rule;
}

struct HermiteBasisSpec {
  double length_scale = 1.0;
  int max_level = 0;
  int quadrature_nodes = 0;  ///< 0 selects 2·lmax + 16
  std::vector<double> grid;  ///< optional export abscissae, strictly increasing

  void validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
      throw Error(ErrorCode::NonpositiveScale, "length scale must be positive");
    }
    if (max_level < 0) throw Error(ErrorCode::NegativeLevel, "max_level");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidParams, "grid must increase");
    }
  }

  /// L = √(μ/(m ν)) for particle `mass_index`; requires the μ,ν branch.
  static HermiteBasisSpec from_swanson(const SwansonParams& p, std::size_t mass_index,
                                       int max_level) {
    const DerivedParams d = derive_params(p);
    if (!d.branch_valid.mu_nu) throw Error(ErrorCode::BranchInvalid, "mu, nu undefined");
    if (mass_index >= p.masses.size()) throw Error(ErrorCode::InvalidParams, "mass index");
    HermiteBasisSpec s;
    s.length_scale = std::sqrt(std::sqrt(d.mu_sq) / (p.masses[mass_index] * std::sqrt(d.nu_sq)));
    s.max_level = max_level;
    return s;
  }
};

/// max |G − I| over l, m ≤ lmax, G the quadrature Gram matrix of φ_l at
/// the basis length scale.
inline double orthonormality_check(const HermiteBasisSpec& spec, int lmax) {
  spec.validate();
  if (lmax < 0) throw Error(ErrorCode::NegativeLevel, "lmax");
  const int nodes = spec.quadrature_nodes > 0 ? spec.quadrature_nodes : 2 * lmax + 16;
  if (nodes < 2 * lmax + 8) {
    throw Error(ErrorCode::InsufficientNodes, std::to_string(nodes) + " nodes for lmax " +
                                                  std::to_string(lmax) + " (need 2*lmax+8)");
  }
  const auto rule = gauss_hermite(nodes);
  const double L = spec.length_scale;
  const double inv_sqrt_l = 1.0 / std::sqrt(L);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(lmax + 1, lmax + 1);
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    // x = L t, dx = L dt
    const double x = L * rule->nodes[i];
    const auto tab = hermite_function_table(lmax, x / L);
    const Eigen::VectorXd phi = Eigen::Map<const Eigen::VectorXd>(tab.data(), lmax + 1) * inv_sqrt_l;
    gram.noalias() += (L * rule->function_weights[i]) * phi * phi.transpose();
  }
  return (gram - Eigen::MatrixXd::Identity(lmax + 1, lmax + 1)).cwiseAbs().maxCoeff();
}

/// A function given by its coefficients in the Hermite basis at scale L.
struct WaveFunction {
  ComplexVector fock_coords;
  HermiteBasisSpec basis;

  cplx evaluate(double x) const {
    if (fock_coords.size() == 0) return {0.0, 0.0};
    const int lmax = static_cast<int>(fock_coords.size()) - 1;
    const auto tab = hermite_function_table(lmax, x / basis.length_scale);
    const double s = 1.0 / std::sqrt(basis.length_scale);
    cplx acc(0.0, 0.0);
    for (int l = 0; l <= lmax; ++l) acc += fock_coords(l) * (tab[static_cast<std::size_t>(l)] * s);
    return acc;
  }
};

struct GridSample {
  double x;
  cplx value;
};

inline std::vector<GridSample> sample_on_grid(const WaveFunction& wf, const std::vector<double>& grid) {
  std::vector<GridSample> out;
  out.reserve(grid.size());
  for (double x : grid) out.push_back({x, wf.evaluate(x)});
  return out;
}

/// Plain numeric table: one "x re im" line per abscissa, 17 significant digits.
inline void write_grid_table(std::ostream& os, const std::vector<GridSample>& samples) {
  char buf[128];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", s.x, s.value.real(), s.value.imag());
    os << buf;
  }
}

struct DeformedEigenfunction {
  WaveFunction psi;        ///< coordinates of ρ⁻¹φ_l
  ComplexVector phi;       ///< orthonormal eigenvector φ_l of h_ρ
  double eigenvalue = 0.0; ///< ε_l of h_ρ
  double residual = 0.0;   ///< interior ‖HΨ − εΨ‖ / (‖H‖_F‖Ψ‖)
};

/// φ_l is the l-th (ascending) orthonormal eigenvector of the Hermitian part
/// of h_ρ = ρHρ⁻¹ in Fock coordinates, and Ψ_l = ρ⁻¹φ_l. When h_ρ is
/// diagonal this is column l of ρ⁻¹.
inline DeformedEigenfunction deformed_eigenfunction(const QuasiHermitianSystem& sys, int l,
                                                    const HermiteBasisSpec& spec) {
  if (!sys.rho()) throw Error(ErrorCode::MissingRho, "deformed_eigenfunction needs rho");
  if (l < 0) throw Error(ErrorCode::NegativeLevel, "level " + std::to_string(l));
  const auto& trunc = sys.A().trunc;
  if (l >= trunc.dim - trunc.interior_margin) {
    throw Error(ErrorCode::LevelTooHigh,
                "level " + std::to_string(l) + " outside the interior of N=" + std::to_string(trunc.dim));
  }
  const HermitianCounterpart hc = hermitian_counterpart(sys);
  const EigenPair ep = eig_hermitian(hermitian_part(hc.h.matrix));

  DeformedEigenfunction out;
  out.phi = ep.right_vectors.col(l);
  out.eigenvalue = ep.values(l).real();
  const ComplexMatrix& rho = *sys.rho();
  out.psi.fock_coords = rho.partialPivLu().solve(out.phi);
  out.psi.basis = spec;

  const ComplexVector r = sys.A().matrix * out.psi.fock_coords - out.eigenvalue * out.psi.fock_coords;
  const auto k = trunc.interior_margin;
  out.residual = r.segment(k, trunc.dim - 2 * k).norm() /
                 (sys.A().matrix.norm() * out.psi.fock_coords.norm());
  return out;
}

/// max_{l,m<levels} |(ρφ_l)†(ρ⁻¹φ_m) − δ_lm| with φ the eigenvectors of h_ρ.
inline double metric_orthogonality_defect(const QuasiHermitianSystem& sys, int levels) {
  if (!sys.rho()) throw Error(ErrorCode::MissingRho, "metric_orthogonality_defect needs rho");
  if (levels < 1 || levels > sys.A().dim()) throw Error(ErrorCode::LevelTooHigh, "levels");
  const HermitianCounterpart hc = hermitian_counterpart(sys);
  const EigenPair ep = eig_hermitian(hermitian_part(hc.h.matrix));
  const ComplexMatrix phi = ep.right_vectors.leftCols(levels);
  const ComplexMatrix& rho = *sys.rho();
  const ComplexMatrix bras = rho * phi;
  const ComplexMatrix kets = rho.partialPivLu().solve(phi);
  const ComplexMatrix gram = bras.adjoint() * kets;
  return (gram - ComplexMatrix::Identity(levels, levels)).cwiseAbs().maxCoeff();
}

struct ExpansionResiduals {
  double reconstruction = 0.0;  ///< ‖Σ c_k R_k − v‖/‖v‖
  double apply = 0.0;           ///< ‖Σ λ c_k R_k − Av‖/(‖A‖_F‖v‖)
  double apply_adjoint = 0.0;   ///< same for A†
  ComplexVector coefficients;
};

/// Expands ψ₁⊗ψ₂ in the composite biorthogonal basis and checks the
/// reconstruction and the expansions of Ĥ and Ĥ† against direct products.
inline ExpansionResiduals composite_expansion_check(const CompositeSystem& cs,
                                                    const HermiteBasisSpec& spec1,
                                                    const HermiteBasisSpec& spec2,
                                                    const WaveFunction& psi1,
                                                    const WaveFunction& psi2) {
  spec1.validate();
  spec2.validate();
  require_same_dim(psi1.fock_coords.size(), cs.A1().dim(), "composite_expansion_check factor 1");
  require_same_dim(psi2.fock_coords.size(), cs.A2().dim(), "composite_expansion_check factor 2");
  const BiorthogonalBasis basis = biorthogonal_basis(cs);
  const ComplexVector v = kron(psi1.fock_coords, psi2.fock_coords);
  const double vn = std::max(v.norm(), 1e-300);
  const double an = std::max(cs.A().matrix.norm(), 1e-300);

  ExpansionResiduals out;
  out.coefficients = expand_ket(basis, v);
  out.reconstruction = (reconstruct_ket(basis, out.coefficients) - v).norm() / vn;
  out.apply = (apply_via_expansion(basis, v, false) - cs.A().matrix * v).norm() / (an * vn);
  out.apply_adjoint =
      (apply_via_expansion(basis, v, true) - cs.A().matrix.adjoint() * v).norm() / (an * vn);
  return out;
}

/// |(K_L f)(x0) − f(x0)| for the partial kernel K_L(x,x') = Σ_{l≤L} φ_l(x)φ_l(x'),
/// with the projections ∫φ_l f evaluated by Gauss-Hermite quadrature.
inline double partial_delta_error(int levels, const std::function<double(double)>& f, double x0,
                                  int nodes = 0) {
  if (levels < 0) throw Error(ErrorCode::NegativeLevel, "levels");
  const int n = nodes > 0 ? nodes : 2 * levels + 64;
  const auto rule = gauss_hermite(n);
  std::vector<double> coeff(static_cast<std::size_t>(levels) + 1, 0.0);
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    const auto tab = hermite_function_table(levels, rule->nodes[i]);
    const double fx = f(rule->nodes[i]) * rule->function_weights[i];
    for (std::size_t l = 0; l < coeff.size(); ++l) coeff[l] += tab[l] * fx;
  }
  const auto at = hermite_function_table(levels, x0);
  double approx = 0.0;
  for (std::size_t l = 0; l < coeff.size(); ++l) approx += coeff[l] * at[l];
  return std::abs(approx - f(x0));
}

}  // namespace qhspec
