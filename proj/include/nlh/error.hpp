#pragma once

#include <stdexcept>
#include <string>

namespace nlh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (grid sizes, partition tables, config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with inputs that violate its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A linear system, eigenproblem or normalization turned out to be singular.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace nlh
