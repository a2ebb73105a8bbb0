#include <gtest/gtest.h>

#include <cmath>

#include "qhspec/cli_runner.hpp"

using namespace qhspec;

namespace {

SwansonParams point(double z, Eigen::Index n) {
  SwansonParams p;
  p.omega = 2.0;
  p.alpha = 0.3;
  p.beta = 0.1;
  p.z = z;
  p.trunc = FockTruncation::with_default_margin(n);
  return p;
}

}  // namespace

// Closed-form root, oracle metric and diagonal symmetrizer all describe the
// same operator at z = 0; their metrics differ but each intertwines H.
TEST(Pipeline, ThreeMetricsForOneHamiltonian) {
  const auto p = point(0.0, 48);
  const TruncatedOperator h = build_swanson_hamiltonian(p);
  const auto closed = QuasiHermitianSystem::from_rho(
      h, build_rho_exponential(p, build_generators(p.trunc)).matrix);
  const MetricOperator oracle = metric_from_spectrum(h);
  const ComplexMatrix d = diagonal_symmetrizer(p);
  const ComplexMatrix sym = (d * d).inverse();

  EXPECT_LT(closed.interior_residual(), 1e-14);
  EXPECT_LT(check_quasi_hermitian(h, oracle).full_residual, 1e-10);
  EXPECT_LT(check_quasi_hermitian(h, sym).full_residual, 1e-14);

  // The Hermitian counterparts share H's spectrum.
  const auto hc = hermitian_counterpart(closed);
  const EigenPair e_h = eig_general(h.matrix);
  const EigenPair e_c = eig_hermitian(hermitian_part(hc.h.matrix));
  for (int l = 0; l < 10; ++l) EXPECT_NEAR(e_c.values(l).real(), e_h.values(l).real(), 1e-9);
}

TEST(Pipeline, CompositeFromClosedFormFactors) {
  const auto p = point(0.0, 10);
  const TruncatedOperator h = build_swanson_hamiltonian(p);
  const auto s = QuasiHermitianSystem::from_rho(
      h, build_rho_exponential(p, build_generators(p.trunc)).matrix);
  const CompositeSystem cs = compose(s, s);
  EXPECT_LT(cs.intertwining_residual(), 1e-14);
  EXPECT_LT(check_extension_decomposition(cs, 30), 1e-12);
  EXPECT_LT(check_symmetric_relation(cs, 30).max(), 1e-12);
  const BiorthogonalBasis b = biorthogonal_basis(cs);
  EXPECT_LT(b.completeness_residual(), 1e-9);
}

TEST(Pipeline, DeformedEigenfunctionsAreMetricOrthonormal) {
  const auto p = point(0.0, 40);
  const TruncatedOperator h = build_swanson_hamiltonian(p);
  const auto sys = QuasiHermitianSystem::from_rho(
      h, build_rho_exponential(p, build_generators(p.trunc)).matrix);
  HermiteBasisSpec spec;
  spec.length_scale = 1.0 / std::sqrt(p.omega);
  const auto d0 = deformed_eigenfunction(sys, 0, spec);
  const auto d1 = deformed_eigenfunction(sys, 1, spec);
  EXPECT_NEAR(std::abs(eta_inner(sys.eta(), d0.psi.fock_coords, d0.psi.fock_coords)), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(eta_inner(sys.eta(), d0.psi.fock_coords, d1.psi.fock_coords)), 0.0, 1e-10);
  // ground state is even in x
  EXPECT_NEAR(std::abs(d0.psi.evaluate(0.7) - d0.psi.evaluate(-0.7)), 0.0, 1e-12);
}

TEST(Pipeline, CliRowsAreReDerivableFromLibrary) {
  auto cfg = cli::parse_config_text(
      "omega = 2\nalpha = 0.3\nbeta = 0.1\ntruncation = 32\nmetric_source = rho_exponential\n"
      "checks = intertwining_interior, hermiticity\n");
  cli::validate_config(cfg, "metric-check");
  const auto res = cli::execute(cfg);
  const auto p = point(0.0, 32);
  const auto sys = QuasiHermitianSystem::from_rho(
      build_swanson_hamiltonian(p), build_rho_exponential(p, build_generators(p.trunc)).matrix);
  EXPECT_EQ(res.rows[0].residuals.at("intertwining_interior").value, sys.interior_residual());
  EXPECT_EQ(res.rows[0].residuals.at("hermiticity").value,
            hermitian_counterpart(sys).interior_hermiticity);
}
