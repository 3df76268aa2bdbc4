#pragma once

#include <stdexcept>
#include <string>

namespace endotree {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model input: bad schema, out-of-range phi targets, duplicate labels.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of budget. `residual` is the last measured gap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Exhaustive enumeration or allocation would exceed the configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the analysis (rho > 0, primitivity, 2 rho > 1, ...) is not met.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An internal consistency check failed (e.g. marginal drift in the bivariate map).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace endotree
