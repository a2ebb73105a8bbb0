#include <gtest/gtest.h>

#include <cmath>

#include "qhspec/fock_algebra.hpp"

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

ComplexMatrix block(const ComplexMatrix& m, Eigen::Index k) {
  return m.block(k, k, m.rows() - 2 * k, m.cols() - 2 * k);
}

}  // namespace

TEST(FockTruncation, DefaultMargin) {
  EXPECT_EQ(FockTruncation::with_default_margin(64).interior_margin, 4);
  EXPECT_EQ(FockTruncation::with_default_margin(128).interior_margin, 8);
  EXPECT_EQ(FockTruncation::with_default_margin(256).interior_margin, 16);
  // small N is clamped so that an interior remains
  EXPECT_EQ(FockTruncation::with_default_margin(5).interior_margin, 2);
  EXPECT_EQ(FockTruncation::with_default_margin(2).interior_margin, 0);
}

TEST(FockTruncation, InvalidInputs) {
  EXPECT_EQ(code_of([] { FockTruncation(0, 0); }), ErrorCode::InvalidTruncation);
  EXPECT_EQ(code_of([] { FockTruncation(8, 4); }), ErrorCode::InvalidTruncation);
  EXPECT_EQ(code_of([] { FockTruncation(8, -1); }), ErrorCode::InvalidTruncation);
  EXPECT_EQ(code_of([] { FockTruncation(kMaxCompositeDim + 1, 0); }), ErrorCode::InvalidTruncation);
  EXPECT_NO_THROW(FockTruncation(1, 0));
}

TEST(Generators, LadderEntries) {
  const GeneratorSet g = build_generators(FockTruncation(5, 1));
  for (Eigen::Index n = 0; n + 1 < 5; ++n) {
    EXPECT_DOUBLE_EQ(g.a.matrix(n, n + 1).real(), std::sqrt(double(n + 1)));
    EXPECT_DOUBLE_EQ(g.a_dag.matrix(n + 1, n).real(), std::sqrt(double(n + 1)));
  }
  EXPECT_EQ((g.a.matrix.adjoint() - g.a_dag.matrix).norm(), 0.0);
  EXPECT_LT((g.a_dag.matrix * g.a.matrix - g.number_op.matrix).norm(), 1e-14);
}

TEST(Generators, CanonicalCommutatorWithBoundaryDefect) {
  const Eigen::Index n = 12;
  const GeneratorSet g = build_generators(FockTruncation(n, 2));
  const ComplexMatrix c = commutator(g.a.matrix, g.a_dag.matrix);
  for (Eigen::Index i = 0; i + 1 < n; ++i) EXPECT_NEAR(c(i, i).real(), 1.0, 1e-13);
  // the last Fock state sees [a, a†] = −(N−1)
  EXPECT_NEAR(c(n - 1, n - 1).real(), -double(n - 1), 1e-12);
}

TEST(Generators, Su11RelationsHoldOnInterior) {
  const Eigen::Index n = 20, k = 2;
  const GeneratorSet g = build_generators(FockTruncation(n, k));
  const ComplexMatrix& k0 = g.K0.matrix;
  const ComplexMatrix& kp = g.K_plus.matrix;
  const ComplexMatrix& km = g.K_minus.matrix;
  EXPECT_LT(block(commutator(k0, kp) - kp, k).norm(), 1e-12);
  EXPECT_LT(block(commutator(k0, km) + km, k).norm(), 1e-12);
  EXPECT_LT(block(commutator(kp, km) + 2.0 * k0, k).norm(), 1e-12);
  // [K₀, K±] = ±K± holds exactly even at the edge; [K₊, K₋] does not.
  EXPECT_LT((commutator(k0, kp) - kp).norm(), 1e-12);
  EXPECT_GT((commutator(kp, km) + 2.0 * k0).norm(), 1.0);
}

TEST(Generators, K0Diagonal) {
  const GeneratorSet g = build_generators(FockTruncation(4, 0));
  EXPECT_DOUBLE_EQ(g.K0.matrix(0, 0).real(), 0.25);
  EXPECT_DOUBLE_EQ(g.K0.matrix(3, 3).real(), 1.75);
}

TEST(TruncatedOperator, InteriorBlock) {
  ComplexMatrix m = ComplexMatrix::Zero(6, 6);
  m(2, 3) = 7.0;
  const TruncatedOperator op(m, FockTruncation(6, 2));
  const ComplexMatrix in = op.interior(op.matrix);
  EXPECT_EQ(in.rows(), 2);
  EXPECT_EQ(in(0, 1), cplx(7.0));
}

TEST(TruncatedOperator, DimensionChecks) {
  EXPECT_EQ(code_of([] { TruncatedOperator(ComplexMatrix::Zero(3, 3), FockTruncation(4, 0)); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { TruncatedOperator(ComplexMatrix::Zero(3, 2)); }), ErrorCode::NotSquare);
  const TruncatedOperator plain(ComplexMatrix::Identity(3, 3));
  EXPECT_EQ(plain.trunc.interior_margin, 0);
  EXPECT_EQ(plain.dim(), 3);
}

TEST(Parity, SplitsEvenOdd) {
  const GeneratorSet g = build_generators(FockTruncation(7, 0));
  const ComplexMatrix h = g.number_op.matrix + 0.3 * g.K_plus.matrix + 0.1 * g.K_minus.matrix;
  const ParityBlocks pb = parity_blocks(h);
  EXPECT_EQ(pb.even_block.rows(), 4);
  EXPECT_EQ(pb.odd_block.rows(), 3);
  EXPECT_DOUBLE_EQ(pb.even_block(1, 1).real(), 2.0);  // n = 2
  EXPECT_DOUBLE_EQ(pb.odd_block(1, 0).real(), 0.3 * 0.5 * std::sqrt(2.0 * 3.0));
}

TEST(Parity, RejectsOddCoupling) {
  const GeneratorSet g = build_generators(FockTruncation(6, 0));
  EXPECT_EQ(code_of([&] { parity_blocks(g.a); }), ErrorCode::NotParityPreserving);
}
