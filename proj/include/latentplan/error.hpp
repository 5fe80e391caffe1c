#pragma once

#include <stdexcept>
#include <string>

namespace latentplan {

enum class ErrorKind {
  FactorizationFailure,
  NonFiniteObjective,
  MissingPhase,
  UnreachableGoal,
  AllZeroDesirability,
  DeadEndState,
  NoFeasiblePath,
  DegenerateWeights,
  InvalidInput,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FactorizationFailure: return "FactorizationFailure";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::MissingPhase: return "MissingPhase";
    case ErrorKind::UnreachableGoal: return "UnreachableGoal";
    case ErrorKind::AllZeroDesirability: return "AllZeroDesirability";
    case ErrorKind::DeadEndState: return "DeadEndState";
    case ErrorKind::NoFeasiblePath: return "NoFeasiblePath";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace latentplan
