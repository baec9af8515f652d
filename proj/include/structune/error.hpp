#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace structune {

enum class ErrorKind {
  DimensionMismatch,
  IllPosed,
  ResolventSingular,
  EigenFailure,
  Unstable,
  NonzeroFeedthrough,
  SingularR,
  NoConvergence,
  BoundViolation,
  MissingScheduleValue,
  QPFailure,
  Unstabilizable,
  InfeasibleHard,
  QEqualsOne,
  AlgebraicLoop,
  StepTooLarge,
  CFLViolation,
  Parse,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` lets callers map
// them to exit codes or retry policies.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IllPosed: return "IllPosed";
    case ErrorKind::ResolventSingular: return "ResolventSingular";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::Unstable: return "Unstable";
    case ErrorKind::NonzeroFeedthrough: return "NonzeroFeedthrough";
    case ErrorKind::SingularR: return "SingularR";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BoundViolation: return "BoundViolation";
    case ErrorKind::MissingScheduleValue: return "MissingScheduleValue";
    case ErrorKind::QPFailure: return "QPFailure";
    case ErrorKind::Unstabilizable: return "Unstabilizable";
    case ErrorKind::InfeasibleHard: return "InfeasibleHard";
    case ErrorKind::QEqualsOne: return "QEqualsOne";
    case ErrorKind::AlgebraicLoop: return "AlgebraicLoop";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace structune
