#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace finsler {

enum class ErrorCode {
  kDomainError,
  kDegenerateVector,
  kOrderExceeded,
  kSingularMetric,
  kLeftDomain,
  kIntegratorFailure,
  kNoConvergence,
  kZeroCovector,
  kZeroGradient,
  kZeroReference,
  kDegenerateFlag,
  kGradientDegenerate,
  kUnknownModel,
  kValidationFailure,
  kParseError,
  kInvalidArgument,
  kIoError,
};

inline const char* errorName(ErrorCode c) {
  switch (c) {
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kDegenerateVector: return "DegenerateVector";
    case ErrorCode::kOrderExceeded: return "OrderExceeded";
    case ErrorCode::kSingularMetric: return "SingularMetric";
    case ErrorCode::kLeftDomain: return "LeftDomain";
    case ErrorCode::kIntegratorFailure: return "IntegratorFailure";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kZeroCovector: return "ZeroCovector";
    case ErrorCode::kZeroGradient: return "ZeroGradient";
    case ErrorCode::kZeroReference: return "ZeroReference";
    case ErrorCode::kDegenerateFlag: return "DegenerateFlag";
    case ErrorCode::kGradientDegenerate: return "GradientDegenerate";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kValidationFailure: return "ValidationFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// detail carries the exit time for LeftDomain and the best residual for
// NoConvergence; it is NaN otherwise.
class FinslerError : public std::runtime_error {
 public:
  FinslerError(ErrorCode code, const std::string& what, double detail = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(std::string(errorName(code)) + ": " + what), code_(code), detail_(detail) {}

  ErrorCode code() const { return code_; }
  double detail() const { return detail_; }

 private:
  ErrorCode code_;
  double detail_;
};

}  // namespace finsler
