#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chi2 {

enum class ErrorKind {
  PoleProximity,
  ZeroTransmission,
  SingularResponse,
  NoSolution,
  NoRoot,
  TruncationInsufficient,
  NonConvergence,
  DegenerateCurvature,
  InsufficientTail,
  DegenerateData,
  ReferenceOutsideGrid,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::PoleProximity: return "PoleProximity";
    case ErrorKind::ZeroTransmission: return "ZeroTransmission";
    case ErrorKind::SingularResponse: return "SingularResponse";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::TruncationInsufficient: return "TruncationInsufficient";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateCurvature: return "DegenerateCurvature";
    case ErrorKind::InsufficientTail: return "InsufficientTail";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::ReferenceOutsideGrid: return "ReferenceOutsideGrid";
  }
  return "Unknown";
}

// Failure of a numerical procedure on otherwise valid input. The CLI maps
// these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed or physically invalid run configuration (exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace chi2
