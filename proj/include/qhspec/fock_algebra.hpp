#pragma once

// Ladder operators and su(1,1) generators as top-left N×N corners of their
// infinite Fock-basis matrices. Products are formed after truncation, so the
// last rows/columns are approximate; FockTruncation::interior_margin marks
// how many boundary indices to drop from boundary-sensitive checks.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qhspec/matrix_kernel.hpp"

namespace qhspec {

struct FockTruncation {
  Eigen::Index dim = 1;
  Eigen::Index interior_margin = 0;

  FockTruncation() = default;
  FockTruncation(Eigen::Index n, Eigen::Index margin) : dim(n), interior_margin(margin) {
    validate();
  }

  void validate() const {
    if (dim < 1 || dim > kMaxCompositeDim) {
      throw Error(ErrorCode::InvalidTruncation,
                  "dimension " + std::to_string(dim) + " outside [1, " +
                      std::to_string(kMaxCompositeDim) + "]");
    }
    if (interior_margin < 0 || 2 * interior_margin >= dim) {
      throw Error(ErrorCode::InvalidTruncation, "margin " + std::to_string(interior_margin) +
                                                    " incompatible with dimension " +
                                                    std::to_string(dim));
    }
  }

  Eigen::Index interior_size() const { return dim - 2 * interior_margin; }

  /// max(4, N/16), clamped so that 2k < N still holds for small N.
  static FockTruncation with_default_margin(Eigen::Index n) {
    const Eigen::Index k = std::min<Eigen::Index>(std::max<Eigen::Index>(4, n / 16), (n - 1) / 2);
    return FockTruncation(n, k);
  }
};

/// An operator in the truncated Fock basis together with its truncation.
struct TruncatedOperator {
  ComplexMatrix matrix;
  FockTruncation trunc;

  TruncatedOperator() = default;
  TruncatedOperator(ComplexMatrix m, FockTruncation t) : matrix(std::move(m)), trunc(t) {
    require_square(matrix, "TruncatedOperator");
    require_same_dim(matrix.rows(), trunc.dim, "TruncatedOperator");
  }
  /// Margin-free wrapper for matrices that are not truncations of anything.
  explicit TruncatedOperator(ComplexMatrix m) : matrix(std::move(m)) {
    require_square(matrix, "TruncatedOperator");
    trunc = FockTruncation(matrix.rows(), 0);
  }

  Eigen::Index dim() const { return matrix.rows(); }

  /// The block with `interior_margin` rows/columns removed on each side.
  ComplexMatrix interior(const ComplexMatrix& m) const {
    const auto k = trunc.interior_margin;
    return m.block(k, k, dim() - 2 * k, dim() - 2 * k);
  }
};

struct GeneratorSet {
  TruncatedOperator a, a_dag, number_op, K0, K_plus, K_minus;
};

inline GeneratorSet build_generators(const FockTruncation& trunc) {
  trunc.validate();
  const Eigen::Index n = trunc.dim;
  ComplexMatrix a = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = std::sqrt(static_cast<double>(i + 1));
  const ComplexMatrix a_dag = a.transpose();
  ComplexMatrix number = ComplexMatrix::Zero(n, n);
  ComplexMatrix k0 = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    number(i, i) = static_cast<double>(i);
    k0(i, i) = 0.5 * (static_cast<double>(i) + 0.5);
  }
  return GeneratorSet{
      TruncatedOperator(a, trunc),
      TruncatedOperator(a_dag, trunc),
      TruncatedOperator(number, trunc),
      TruncatedOperator(k0, trunc),
      TruncatedOperator(0.5 * a_dag * a_dag, trunc),
      TruncatedOperator(0.5 * a * a, trunc),
  };
}

inline ComplexMatrix commutator(const ComplexMatrix& x, const ComplexMatrix& y) {
  return x * y - y * x;
}

struct ParityBlocks {
  ComplexMatrix even_block;  ///< Fock indices 0, 2, 4, ...
  ComplexMatrix odd_block;   ///< Fock indices 1, 3, 5, ...
};

/// Splits a matrix that only couples n ↔ n ± 2k into its even and odd
/// Fock sectors.
inline ParityBlocks parity_blocks(const ComplexMatrix& m) {
  require_square(m, "parity_blocks");
  const Eigen::Index n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (((i - j) % 2 != 0) && m(i, j) != cplx(0.0, 0.0)) {
        throw Error(ErrorCode::NotParityPreserving,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ") couples parities");
      }
    }
  }
  const Eigen::Index ne = (n + 1) / 2, no = n / 2;
  ParityBlocks out{ComplexMatrix(ne, ne), ComplexMatrix(no, no)};
  for (Eigen::Index i = 0; i < ne; ++i)
    for (Eigen::Index j = 0; j < ne; ++j) out.even_block(i, j) = m(2 * i, 2 * j);
  for (Eigen::Index i = 0; i < no; ++i)
    for (Eigen::Index j = 0; j < no; ++j) out.odd_block(i, j) = m(2 * i + 1, 2 * j + 1);
  return out;
}

inline ParityBlocks parity_blocks(const TruncatedOperator& op) { return parity_blocks(op.matrix); }

}  // namespace qhspec
