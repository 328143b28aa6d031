#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input rejected before any computation: bad parameters, mismatched shapes,
/// malformed files. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation was attempted and failed numerically. Exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GridMismatch : public ValidationError {
 public:
  GridMismatch() : ValidationError("fields or operators live on different grids") {}
  using ValidationError::ValidationError;
};

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RealityViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BoundExceeded : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ArityMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// det(I + ∂f) is not strictly positive at some collocation point.
class JacobianViolation : public NumericalError {
 public:
  JacobianViolation(std::string what, double min_det)
      : NumericalError(std::move(what)), min_det_(min_det) {}
  double min_det() const { return min_det_; }

 private:
  double min_det_;
};

/// Diffeomorphism inversion exhausted its iteration budget.
class InversionFailure : public NumericalError {
 public:
  InversionFailure(std::string what, double residual)
      : NumericalError(std::move(what)), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// The truncated operator is (numerically) singular.
class SingularOperator : public NumericalError {
 public:
  SingularOperator(std::string what, double smallest_singular_value)
      : NumericalError(std::move(what)), sigma_min_(smallest_singular_value) {}
  double smallest_singular_value() const { return sigma_min_; }

 private:
  double sigma_min_;
};

/// Raised by the geodesic integrators when the norm or CFL guard trips. This is
/// a report about the discrete run, not a statement about the continuous flow.
class BlowUpSuspected : public NumericalError {
 public:
  BlowUpSuspected(std::string what, double time, std::vector<double> norm_history)
      : NumericalError(std::move(what)), time_(time), history_(std::move(norm_history)) {}
  double time() const { return time_; }
  const std::vector<double>& norm_history() const { return history_; }

 private:
  double time_;
  std::vector<double> history_;
};

}  // namespace epdiff
