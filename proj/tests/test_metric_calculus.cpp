#include <gtest/gtest.h>

#include <cmath>

#include "qhspec/metric_calculus.hpp"
#include "qhspec/sampling.hpp"
#include "qhspec/swanson_model.hpp"

using namespace qhspec;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qhspec::Error thrown";
  return ErrorCode::ConfigParseError;
}

// [[a, b], [c, a]] with b, c > 0 is intertwined by diag(c, b).
TruncatedOperator two_by_two(double a, double b, double c) {
  ComplexMatrix m(2, 2);
  m << a, b, c, a;
  return TruncatedOperator(m);
}

SwansonParams swanson(Eigen::Index n) {
  SwansonParams p;
  p.omega = 2.0;
  p.alpha = 0.3;
  p.beta = 0.1;
  p.trunc = FockTruncation::with_default_margin(n);
  return p;
}

}  // namespace

TEST(MetricOperator, IdentityIsPositive) {
  const MetricOperator eta(ComplexMatrix::Identity(4, 4));
  EXPECT_LT((eta.inverse() - ComplexMatrix::Identity(4, 4)).norm(), 1e-15);
  EXPECT_EQ(eta.condition_estimate(), 1.0);
  EXPECT_LT(eta.inverse_residual(), 1e-15);
}

TEST(MetricOperator, RejectsIndefiniteAndNonHermitian) {
  ComplexMatrix m = ComplexMatrix::Identity(2, 2);
  m(1, 1) = -1.0;
  EXPECT_EQ(code_of([&] { MetricOperator{m}; }), ErrorCode::NotPositiveDefinite);
  m(1, 1) = 1.0;
  m(0, 1) = 0.5;
  EXPECT_EQ(code_of([&] { MetricOperator{m}; }), ErrorCode::NotHermitian);
  EXPECT_EQ(code_of([] { MetricOperator{ComplexMatrix::Zero(2, 3)}; }), ErrorCode::NotSquare);
}

TEST(MetricOperator, SuppliedInverseIsChecked) {
  const ComplexMatrix eta = 2.0 * ComplexMatrix::Identity(3, 3);
  EXPECT_NO_THROW(MetricOperator(eta, 0.5 * ComplexMatrix::Identity(3, 3)));
  EXPECT_EQ(code_of([&] { MetricOperator(eta, ComplexMatrix::Identity(3, 3)); }),
            ErrorCode::NotPositiveDefinite);
}

TEST(EtaInner, WeightsByMetric) {
  ComplexMatrix g = ComplexMatrix::Identity(2, 2);
  g(1, 1) = 3.0;
  const MetricOperator eta(g);
  ComplexVector x(2), y(2);
  x << cplx(0.0, 1.0), 1.0;
  y << 1.0, 2.0;
  // conj(i)·1 + 1·3·2
  EXPECT_EQ(eta_inner(eta, x, y), cplx(6.0, -1.0));
  EXPECT_EQ(eta_inner(eta, y, x), std::conj(cplx(6.0, -1.0)));
}

TEST(CheckQuasiHermitian, HandDerivedTwoByTwo) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  ComplexMatrix g = ComplexMatrix::Zero(2, 2);
  g(0, 0) = 0.5;
  g(1, 1) = 2.0;
  const ResidualReport r = check_quasi_hermitian(a, g);
  EXPECT_LT(r.full_residual, 1e-16);
  // the identity is not a metric for this A: ‖A†−A‖_F/(‖A‖_F‖I‖_F)
  const ResidualReport bad = check_quasi_hermitian(a, ComplexMatrix::Identity(2, 2));
  const double want = std::sqrt(2.0) * 1.5 / (std::sqrt(1.0 + 4.0 + 0.25 + 1.0) * std::sqrt(2.0));
  EXPECT_NEAR(bad.full_residual, want, 1e-15);
}

TEST(CheckQuasiHermitian, DimensionMismatch) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  EXPECT_EQ(code_of([&] { check_quasi_hermitian(a, ComplexMatrix::Identity(3, 3)); }),
            ErrorCode::DimensionMismatch);
}

TEST(MetricFromSpectrum, TwoByTwoIntertwines) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  const MetricOperator eta = metric_from_spectrum(a);
  EXPECT_LT(check_quasi_hermitian(a, eta).full_residual, 1e-15);
  // any metric for this A is diagonal with η₁₁/η₀₀ = b/c = 4
  EXPECT_NEAR(std::abs(eta.matrix()(0, 1)), 0.0, 1e-14);
  EXPECT_NEAR(eta.matrix()(1, 1).real() / eta.matrix()(0, 0).real(), 4.0, 1e-13);
}

TEST(MetricFromSpectrum, HermitianInputGivesIdentity) {
  Rng rng(2);
  const ComplexMatrix p = random_positive_matrix(5, rng);
  const MetricOperator eta = metric_from_spectrum(TruncatedOperator(p));
  EXPECT_LT((eta.matrix() - ComplexMatrix::Identity(5, 5)).norm(), 1e-12);
}

TEST(MetricFromSpectrum, ComplexSpectrumRejected) {
  ComplexMatrix r(2, 2);
  r << 0.0, -1.0, 1.0, 0.0;
  EXPECT_EQ(code_of([&] { metric_from_spectrum(TruncatedOperator(r)); }), ErrorCode::ComplexSpectrum);
}

TEST(MetricFromSpectrum, SwansonOracleAndPositivity) {
  const TruncatedOperator h = build_swanson_hamiltonian(swanson(64));
  const MetricOperator eta = metric_from_spectrum(h);
  EXPECT_LE(check_quasi_hermitian(h, eta).full_residual, 1e-10);
  EXPECT_TRUE(cholesky_positivity(eta.matrix()).is_positive);
  // the η-adjoint reproduces A
  EXPECT_LT((eta_adjoint(h, eta).matrix - h.matrix).norm() / h.matrix.norm(), 1e-9);
}

TEST(MetricFromSpectrum, RandomSimilarityOfHermitian) {
  // A = S D S⁻¹ with real D is quasi-Hermitian with η = (SS†)⁻¹.
  Rng rng(21);
  const Eigen::Index n = 8;
  ComplexMatrix d = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) d(i, i) = double(i) - 2.5;
  const ComplexMatrix s = ComplexMatrix::Identity(n, n) + 0.3 * random_matrix(n, n, rng);
  const TruncatedOperator a(s * d * s.inverse());
  const MetricOperator eta = metric_from_spectrum(a);
  EXPECT_LT(check_quasi_hermitian(a, eta).full_residual, 1e-12);
}

TEST(QuasiHermitianSystem, RhoConsistencyEnforced) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  ComplexMatrix g = ComplexMatrix::Zero(2, 2);
  g(0, 0) = 0.5;
  g(1, 1) = 2.0;
  ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
  rho(0, 0) = std::sqrt(0.5);
  rho(1, 1) = std::sqrt(2.0);
  EXPECT_NO_THROW(QuasiHermitianSystem(a, MetricOperator(g), rho));
  EXPECT_EQ(code_of([&] { QuasiHermitianSystem(a, MetricOperator(g), ComplexMatrix(2.0 * rho)); }),
            ErrorCode::InvalidParams);
}

TEST(HermitianCounterpart, TwoByTwoIsSymmetric) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
  rho(0, 0) = std::sqrt(0.5);
  rho(1, 1) = std::sqrt(2.0);
  const auto sys = QuasiHermitianSystem::from_rho(a, rho);
  const HermitianCounterpart hc = hermitian_counterpart(sys);
  EXPECT_LT(hc.full_hermiticity, 1e-15);
  // ρAρ⁻¹ off-diagonal = √(bc) = 1
  EXPECT_NEAR(hc.h.matrix(0, 1).real(), 1.0, 1e-15);
}

TEST(HermitianCounterpart, MissingRho) {
  const TruncatedOperator a = two_by_two(1.0, 2.0, 0.5);
  const QuasiHermitianSystem sys(a, metric_from_spectrum(a));
  EXPECT_FALSE(sys.rho().has_value());
  EXPECT_EQ(code_of([&] { hermitian_counterpart(sys); }), ErrorCode::MissingRho);
}

TEST(HermitianCounterpart, OracleRootOfSwanson) {
  const TruncatedOperator h = build_swanson_hamiltonian(swanson(32));
  const MetricOperator eta = metric_from_spectrum(h);
  const QuasiHermitianSystem sys(h, eta, sqrtm_positive(eta.matrix()));
  EXPECT_LT(hermitian_counterpart(sys).full_hermiticity, 1e-9);
}

TEST(Property, ResidualInvariantUnderMetricScaling) {
  const TruncatedOperator h = build_swanson_hamiltonian(swanson(16));
  const MetricOperator eta = metric_from_spectrum(h);
  const ComplexMatrix scaled = 7.5 * eta.matrix();
  EXPECT_NEAR(check_quasi_hermitian(h, scaled).full_residual,
              check_quasi_hermitian(h, eta.matrix()).full_residual, 1e-15);
}

TEST(Property, InteriorNeverExceedsFullNumerator) {
  const TruncatedOperator h = build_swanson_hamiltonian(swanson(32));
  const ResidualReport r = check_quasi_hermitian(h, ComplexMatrix::Identity(32, 32));
  EXPECT_LE(r.interior_residual, r.full_residual);
}
