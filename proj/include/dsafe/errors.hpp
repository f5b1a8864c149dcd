#pragma once

#include <stdexcept>
#include <string>

namespace dsafe {

enum class ErrorCode {
  // network
  NotSymmetric,
  NotDoublyStochastic,
  ZeroDiagonal,
  Disconnected,
  DimensionMismatch,
  ShapeMismatch,
  // geometry
  ZeroNormal,
  MaxIterationsExceeded,
  InfeasibleConstraintSet,
  NoConvergence,
  EmptyShrunkSet,
  // estimation
  NonpositiveInput,
  DivergenceDetected,
  SingularSystem,
  EmptyEstimatedSet,
  // losses
  TargetsOutsideSafeSet,
  DomainNotPositive,
  DomainViolation,
  // optimizer / harness
  ScheduleInvalid,
  HorizonMismatch,
  ConfigInvalid,
  IoError,
};

const char* error_code_name(ErrorCode code);

/// Single exception type for the whole library; `code` identifies the
/// violated contract and `what()` prepends its name to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotDoublyStochastic: return "NotDoublyStochastic";
    case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroNormal: return "ZeroNormal";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::InfeasibleConstraintSet: return "InfeasibleConstraintSet";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyShrunkSet: return "EmptyShrunkSet";
    case ErrorCode::NonpositiveInput: return "NonpositiveInput";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptyEstimatedSet: return "EmptyEstimatedSet";
    case ErrorCode::TargetsOutsideSafeSet: return "TargetsOutsideSafeSet";
    case ErrorCode::DomainNotPositive: return "DomainNotPositive";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::ScheduleInvalid: return "ScheduleInvalid";
    case ErrorCode::HorizonMismatch: return "HorizonMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace dsafe
