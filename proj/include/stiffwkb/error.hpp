#pragma once

#include <stdexcept>
#include <string>

namespace stiffwkb {

/// Failure categories raised by the library. The CLI maps `config` to exit
/// code 2 and every solver-side kind to exit code 3.
enum class ErrorKind {
  non_positive_coefficient,
  tolerance_not_reached,
  mesh_too_large,
  no_convergence,
  resonant_shift,
  solvability_violated,
  degenerate_delta,
  empty_sequence,
  ambiguous_match,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::non_positive_coefficient: return "NonPositiveCoefficient";
    case ErrorKind::tolerance_not_reached: return "ToleranceNotReached";
    case ErrorKind::mesh_too_large: return "MeshTooLarge";
    case ErrorKind::no_convergence: return "NoConvergence";
    case ErrorKind::resonant_shift: return "ResonantShift";
    case ErrorKind::solvability_violated: return "SolvabilityViolated";
    case ErrorKind::degenerate_delta: return "DegenerateDelta";
    case ErrorKind::empty_sequence: return "EmptySequence";
    case ErrorKind::ambiguous_match: return "AmbiguousMatch";
    case ErrorKind::config: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Carries the residual reached when an iterative solve gives up.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual)
      : Error(ErrorKind::no_convergence, what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Names the offending configuration field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorKind::config, "field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace stiffwkb
