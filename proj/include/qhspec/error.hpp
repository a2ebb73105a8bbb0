#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qhspec {

enum class ErrorCode {
  NotSquare,
  NotHermitian,
  NotPositiveDefinite,
  NoConvergence,
  DefectiveMatrix,
  Overflow,
  DimensionOverflow,
  DimensionMismatch,
  InvalidTruncation,
  NotParityPreserving,
  ComplexSpectrum,
  MissingRho,
  InvalidParams,
  BranchInvalid,
  InputNotQuasiHermitian,
  NegativeLevel,
  NonpositiveScale,
  InsufficientNodes,
  LevelTooHigh,
  ConfigParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DefectiveMatrix: return "DefectiveMatrix";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidTruncation: return "InvalidTruncation";
    case ErrorCode::NotParityPreserving: return "NotParityPreserving";
    case ErrorCode::ComplexSpectrum: return "ComplexSpectrum";
    case ErrorCode::MissingRho: return "MissingRho";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::BranchInvalid: return "BranchInvalid";
    case ErrorCode::InputNotQuasiHermitian: return "InputNotQuasiHermitian";
    case ErrorCode::NegativeLevel: return "NegativeLevel";
    case ErrorCode::NonpositiveScale: return "NonpositiveScale";
    case ErrorCode::InsufficientNodes: return "InsufficientNodes";
    case ErrorCode::LevelTooHigh: return "LevelTooHigh";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qhspec
