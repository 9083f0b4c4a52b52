#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abplab {

enum class ErrorKind {
  InvalidArgument,
  UnsupportedDimension,
  NonImmersion,
  RankDeficientFit,
  DegenerateMetric,
  DegenerateMesh,
  NonPositiveDensity,
  NonFinite,
  SolverNonConvergence,
  IncompatibleRhs,
  MeanCurvatureHypothesis,
  Disconnected,
  NotOnUnitSphere,
  HessianUnavailable,
  FdStepUnderflow,
  NotAMember,
  Parse,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::UnsupportedDimension: return "unsupported dimension";
    case ErrorKind::NonImmersion: return "non-immersion point";
    case ErrorKind::RankDeficientFit: return "rank-deficient local fit";
    case ErrorKind::DegenerateMetric: return "degenerate metric";
    case ErrorKind::DegenerateMesh: return "degenerate mesh";
    case ErrorKind::NonPositiveDensity: return "nonpositive density";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::SolverNonConvergence: return "solver non-convergence";
    case ErrorKind::IncompatibleRhs: return "incompatible right-hand side";
    case ErrorKind::MeanCurvatureHypothesis: return "hypothesis |H| = 1 violated";
    case ErrorKind::Disconnected: return "hypothesis violated: disconnected submanifold";
    case ErrorKind::NotOnUnitSphere: return "not a submanifold of the unit sphere";
    case ErrorKind::HessianUnavailable: return "Hessian unavailable on mesh backend";
    case ErrorKind::FdStepUnderflow: return "finite-difference step underflow";
    case ErrorKind::NotAMember: return "sample is not an A_r member";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Io: return "I/O error";
  }
  return "unknown error";
}

/// Every failure raised by the library carries a kind so callers (and tests)
/// can tell precondition violations apart without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Same kind, message prefixed with the pipeline stage that raised it.
  Error with_stage(std::string_view stage) const {
    Error e(*this);
    e.what_ = std::string("[") + std::string(stage) + "] " + std::runtime_error::what();
    return e;
  }

  const char* what() const noexcept override {
    return what_.empty() ? std::runtime_error::what() : what_.c_str();
  }

 private:
  ErrorKind kind_;
  std::string what_;
};

}  // namespace abplab
