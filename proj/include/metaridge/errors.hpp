#pragma once

#include <stdexcept>
#include <string>

namespace metaridge {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix expected to be symmetric positive definite is not (failed
// Cholesky, non-symmetric beyond tolerance, or condition number > 1e12).
class NotSpdError : public Error {
 public:
  explicit NotSpdError(const std::string& msg) : Error(msg) {}
};

class DimensionMismatchError : public Error {
 public:
  explicit DimensionMismatchError(const std::string& msg) : Error(msg) {}
};

// Rank-deficient system where a unique solution was required.
class SingularError : public Error {
 public:
  explicit SingularError(const std::string& msg) : Error(msg) {}
};

// Backtracking line search exhausted its halving budget without finding
// an acceptable step.
class StepFailureError : public Error {
 public:
  explicit StepFailureError(const std::string& msg) : Error(msg) {}
};

// Fixed-point iteration did not reach the requested tolerance.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& msg, double residual, int iterations)
      : Error(msg), residual(residual), iterations(iterations) {}
  double residual;
  int iterations;
};

class DegenerateDenominatorError : public Error {
 public:
  explicit DegenerateDenominatorError(const std::string& msg) : Error(msg) {}
};

class NonPositiveLambdaError : public Error {
 public:
  explicit NonPositiveLambdaError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace metaridge
