#pragma once

#include <stdexcept>
#include <string>

namespace gppca {

/// Base class for failures caused by the numbers rather than the caller.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Cholesky (or other) factorization failed, even after jitter escalation.
class DecompositionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A coordinate point left the positive-definite cone.
class ValidityError : public NumericalError {
 public:
  ValidityError(const std::string& what, long index)
      : NumericalError(what), index_(index) {}

  /// Offending point / task index, or -1 when not attributable.
  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// An iterative procedure ran out of iterations.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : NumericalError(what), gradient_norm_(gradient_norm) {}

  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

/// Bad configuration: unknown keys, missing fields, out-of-range values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing input data (files, CSV contents, shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gppca
