#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fracnull {

/// Base class for all numerical failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A series or quadrature could not reach its accuracy target.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double last_magnitude = 0.0)
      : Error(what), last_magnitude_(last_magnitude) {}
  double last_magnitude() const { return last_magnitude_; }

 private:
  double last_magnitude_;
};

/// Target state lies outside the (discrete) range of the controllability
/// operator.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Iterative method stopped without meeting its tolerance.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// State norm exceeded the blow-up threshold or became NaN.
class BlowUpError : public NonConvergenceError {
 public:
  using NonConvergenceError::NonConvergenceError;
};

/// A structural precondition (e.g. γ̂ > 0) does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracnull
