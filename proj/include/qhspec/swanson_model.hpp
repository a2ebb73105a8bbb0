#pragma once

// The Swanson oscillator H = ω(a†a + ½) + αa² + βa†² in the truncated Fock
// basis, the derived similarity parameters (c, q, Ω, μ², ν²) and the two
// closed-form candidates for the similarity root ρ. Each closed form is a
// separate constructor with its own validity flag; neither is assumed
// correct, both are judged by the intertwining residual of η = ρ².

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qhspec/fock_algebra.hpp"
#include "qhspec/matrix_kernel.hpp"

namespace qhspec {

struct SwansonParams {
  double omega = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double z = 0.0;
  std::vector<double> masses{1.0};
  FockTruncation trunc = FockTruncation::with_default_margin(32);

  /// The c = 4α = −4β specialization.
  static SwansonParams antisymmetric_branch(double omega, double c, double z, FockTruncation trunc) {
    SwansonParams p;
    p.omega = omega;
    p.alpha = c / 4.0;
    p.beta = -c / 4.0;
    p.z = z;
    p.trunc = trunc;
    return p;
  }

  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidParams, why); };
    if (!std::isfinite(omega) || !std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(z))
      fail("non-finite parameter");
    if (!(omega > 0.0)) fail("omega must be positive");
    if (!(omega * omega - 4.0 * alpha * beta > 0.0)) fail("requires omega^2 - 4 alpha beta > 0");
    if (!(std::abs(z) < 1.0)) fail("requires |z| < 1");
    if (masses.empty()) fail("at least one mass is required");
    for (double m : masses)
      if (!(m > 0.0) || !std::isfinite(m)) fail("masses must be positive");
    trunc.validate();
    if (trunc.dim > kMaxSingleDim) fail("truncation above " + std::to_string(kMaxSingleDim));
  }
};

struct BranchValidity {
  bool exponential = false;    ///< F_ratio > 0: first closed form of ρ defined
  bool diagonal = false;       ///< r_ratio > 0: second closed form of ρ defined
  bool mu_nu = false;          ///< μ², ν² real and positive
  bool symmetrizable = false;  ///< αβ > 0: a real diagonal similarity symmetrizes H
};

struct DerivedParams {
  double c = 0.0;
  double q = 0.0;
  double Omega = 0.0;
  double radicand = 0.0;  ///< Ω²z² − c²/4
  double mu_sq = std::numeric_limits<double>::quiet_NaN();
  double nu_sq = std::numeric_limits<double>::quiet_NaN();
  double theta = std::numeric_limits<double>::quiet_NaN();  ///< ln F / (4√(1−z²))
  double F_ratio = std::numeric_limits<double>::quiet_NaN();
  double r_ratio = std::numeric_limits<double>::quiet_NaN();
  BranchValidity branch_valid;
};

inline DerivedParams derive_params(const SwansonParams& p) {
  p.validate();
  DerivedParams d;
  const double w = p.omega, z = p.z;
  const double s = std::sqrt(1.0 - z * z);
  d.c = 4.0 * p.alpha;
  d.q = s / 2.0;
  d.Omega = std::sqrt(w * w + d.c * d.c / 4.0);
  d.radicand = d.Omega * d.Omega * z * z - d.c * d.c / 4.0;

  if (z != 0.0 && d.radicand > 0.0) {
    const double sign_term = (z / (w * std::abs(z))) * std::sqrt(d.radicand);
    d.mu_sq = (1.0 + sign_term) / (1.0 + z);
    d.nu_sq = w * w * (1.0 - sign_term) / (1.0 - z);
    d.branch_valid.mu_nu = d.mu_sq > 0.0 && d.nu_sq > 0.0;
  }

  const double base = p.alpha + p.beta - w * z;
  const double offset = (p.alpha - p.beta) * s;
  const double f_den = base - offset;
  if (f_den != 0.0) {
    d.F_ratio = (base + offset) / f_den;
    if (d.F_ratio > 0.0 && std::isfinite(d.F_ratio)) {
      d.branch_valid.exponential = true;
      d.theta = std::log(d.F_ratio) / (4.0 * s);
    }
  }

  const double r_den = w * z + d.c * d.q;
  if (r_den != 0.0) {
    d.r_ratio = (w * z - d.c * d.q) / r_den;
    d.branch_valid.diagonal = d.r_ratio > 0.0 && std::isfinite(d.r_ratio);
  }

  d.branch_valid.symmetrizable = p.alpha * p.beta > 0.0;
  return d;
}

/// H[n,n] = ω(n+½), H[n,n+2] = α√((n+1)(n+2)), H[n+2,n] = β√((n+1)(n+2)).
inline TruncatedOperator build_swanson_hamiltonian(const SwansonParams& p) {
  p.validate();
  const Eigen::Index n = p.trunc.dim;
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i, i) = p.omega * (static_cast<double>(i) + 0.5);
    if (i + 2 < n) {
      const double s = std::sqrt(static_cast<double>((i + 1) * (i + 2)));
      h(i, i + 2) = p.alpha * s;
      h(i + 2, i) = p.beta * s;
    }
  }
  return TruncatedOperator(std::move(h), p.trunc);
}

/// D = diag((β/α)^{n/4}) with D⁻¹HD real symmetric; requires αβ > 0.
inline ComplexMatrix diagonal_symmetrizer(const SwansonParams& p) {
  p.validate();
  if (!(p.alpha * p.beta > 0.0)) {
    throw Error(ErrorCode::BranchInvalid, "diagonal symmetrizer needs alpha*beta > 0");
  }
  const double ratio = p.beta / p.alpha;
  ComplexMatrix d = ComplexMatrix::Zero(p.trunc.dim, p.trunc.dim);
  for (Eigen::Index i = 0; i < p.trunc.dim; ++i) {
    d(i, i) = std::pow(ratio, static_cast<double>(i) / 4.0);
  }
  return d;
}

/// ρ = exp(θB), θ = ln(F)/(4√(1−z²)), B = 2K₀ + z(K₊ + K₋).
inline TruncatedOperator build_rho_exponential(const SwansonParams& p, const GeneratorSet& g) {
  const DerivedParams d = derive_params(p);
  require_same_dim(g.K0.dim(), p.trunc.dim, "build_rho_exponential");
  if (!d.branch_valid.exponential) {
    throw Error(ErrorCode::BranchInvalid,
                "F_ratio = " + std::to_string(d.F_ratio) + " is not positive");
  }
  const ComplexMatrix b = 2.0 * g.K0.matrix + p.z * (g.K_plus.matrix + g.K_minus.matrix);
  return TruncatedOperator(expm(d.theta * b), p.trunc);
}

/// ρ = r^{qK₀/(1+z)}, diagonal with entries r^{q(n+½)/(2(1+z))}.
inline TruncatedOperator build_rho_diagonal(const SwansonParams& p, const GeneratorSet& g) {
  const DerivedParams d = derive_params(p);
  require_same_dim(g.K0.dim(), p.trunc.dim, "build_rho_diagonal");
  if (!d.branch_valid.diagonal) {
    throw Error(ErrorCode::BranchInvalid,
                "r_ratio = " + std::to_string(d.r_ratio) + " is not positive");
  }
  const double log_r = std::log(d.r_ratio);
  ComplexMatrix rho = ComplexMatrix::Zero(p.trunc.dim, p.trunc.dim);
  for (Eigen::Index i = 0; i < p.trunc.dim; ++i) {
    const double k0 = g.K0.matrix(i, i).real();
    const double v = std::exp(log_r * d.q * k0 / (1.0 + p.z));
    if (!std::isfinite(v) || v == 0.0) throw Error(ErrorCode::Overflow, "rho_diagonal entry");
    rho(i, i) = v;
  }
  return TruncatedOperator(std::move(rho), p.trunc);
}

struct SpectrumLadders {
  std::vector<double> mu_nu;     ///< μν(l+½)
  std::vector<double> swanson;   ///< √(ω²−4αβ)(l+½)
  double discrepancy = 0.0;      ///< max_l |μν − √(ω²−4αβ)|(l+½)
  double mu_nu_frequency = 0.0;
  double swanson_frequency = 0.0;
};

inline SpectrumLadders analytic_spectrum(const SwansonParams& p, Eigen::Index count) {
  const DerivedParams d = derive_params(p);
  if (!d.branch_valid.mu_nu) {
    throw Error(ErrorCode::BranchInvalid, "mu^2, nu^2 not real-positive at z = " +
                                              std::to_string(p.z));
  }
  if (count < 0 || count > p.trunc.dim / 4) {
    throw Error(ErrorCode::InvalidParams, "count must be within [0, N/4]");
  }
  SpectrumLadders out;
  out.mu_nu_frequency = std::sqrt(d.mu_sq * d.nu_sq);
  out.swanson_frequency = std::sqrt(p.omega * p.omega - 4.0 * p.alpha * p.beta);
  for (Eigen::Index l = 0; l < count; ++l) {
    const double h = static_cast<double>(l) + 0.5;
    out.mu_nu.push_back(out.mu_nu_frequency * h);
    out.swanson.push_back(out.swanson_frequency * h);
    out.discrepancy = std::max(out.discrepancy, std::abs(out.mu_nu.back() - out.swanson.back()));
  }
  return out;
}

/// √(ω²−4αβ)(l+½) alone; defined whenever the parameters are valid.
inline std::vector<double> swanson_ladder(const SwansonParams& p, Eigen::Index count) {
  p.validate();
  const double f = std::sqrt(p.omega * p.omega - 4.0 * p.alpha * p.beta);
  std::vector<double> out;
  for (Eigen::Index l = 0; l < count; ++l) out.push_back(f * (static_cast<double>(l) + 0.5));
  return out;
}

}  // namespace qhspec
