#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ringqed {

enum class ErrorKind {
  NonOrthogonalRotation,
  DomainError,
  EmptyGrid,
  DegenerateField,
  StrainOutOfRange,
  VoltageLimitExceeded,
  PeakOverlap,
  SingularJacobian,
  MaxIterations,
  InsufficientData,
  NoResonanceFound,
  InsufficientDynamicRange,
  DegenerateAbscissa,
  PeakDetectionFailure,
  InfeasiblePlan,
  ParseError,
  NonMonotonicAxis,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonOrthogonalRotation: return "NonOrthogonalRotation";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::DegenerateField: return "DegenerateField";
    case ErrorKind::StrainOutOfRange: return "StrainOutOfRange";
    case ErrorKind::VoltageLimitExceeded: return "VoltageLimitExceeded";
    case ErrorKind::PeakOverlap: return "PeakOverlap";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NoResonanceFound: return "NoResonanceFound";
    case ErrorKind::InsufficientDynamicRange: return "InsufficientDynamicRange";
    case ErrorKind::DegenerateAbscissa: return "DegenerateAbscissa";
    case ErrorKind::PeakDetectionFailure: return "PeakDetectionFailure";
    case ErrorKind::InfeasiblePlan: return "InfeasiblePlan";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonMonotonicAxis: return "NonMonotonicAxis";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace ringqed
