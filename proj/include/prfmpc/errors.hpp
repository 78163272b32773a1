#pragma once

#include <stdexcept>
#include <string>

namespace prfmpc {

/// Conditioning covariance block is singular (non-invertible).
class SingularCovarianceError : public std::runtime_error {
 public:
  explicit SingularCovarianceError(const std::string& what)
      : std::runtime_error(what) {}
};

/// The QP solver failed to converge and could not certify infeasibility.
/// Distinct from a clean "infeasible" status.
class SolverFailureError : public std::runtime_error {
 public:
  explicit SolverFailureError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Scenario configuration is malformed (unknown field, bad value, bad file).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Output file or directory could not be written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prfmpc
