#pragma once

#include <stdexcept>
#include <string>

namespace zee {

// Error taxonomy. Data errors are caller mistakes (malformed files, bad
// flags, scheme/data mismatches); numeric errors are failures of the
// estimation problem itself (singular systems, divergence, empty risk sets).
enum class ErrorCode {
  // data / configuration
  MissingColumn,
  MissingValue,
  NonBinaryIndicator,
  NegativeTime,
  ProbabilityOutOfRange,
  NoSubjectAtRiskAtTau,
  SchemeDataMismatch,
  DomainError,
  ConfigError,
  // numeric
  ZeroRiskSet,
  SingularA,
  SingularSystem,
  SingularAuxiliary,
  SingularJacobian,
  NoConvergence,
  UnboundedDual,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::NonBinaryIndicator: return "NonBinaryIndicator";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::NoSubjectAtRiskAtTau: return "NoSubjectAtRiskAtTau";
    case ErrorCode::SchemeDataMismatch: return "SchemeDataMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ZeroRiskSet: return "ZeroRiskSet";
    case ErrorCode::SingularA: return "SingularA";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SingularAuxiliary: return "SingularAuxiliary";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnboundedDual: return "UnboundedDual";
  }
  return "Unknown";
}

inline bool is_data_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingColumn:
    case ErrorCode::MissingValue:
    case ErrorCode::NonBinaryIndicator:
    case ErrorCode::NegativeTime:
    case ErrorCode::ProbabilityOutOfRange:
    case ErrorCode::NoSubjectAtRiskAtTau:
    case ErrorCode::SchemeDataMismatch:
    case ErrorCode::DomainError:
    case ErrorCode::ConfigError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }
  bool data_error() const { return is_data_error(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, std::string(error_code_name(code)) + ": " + msg);
}

}  // namespace zee
