#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace levyspec {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A constraint on user-supplied parameters failed. Carries the full list of
/// violated constraints so callers can print them all at once.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> violations)
      : Error(what), violations(std::move(violations)) {}
  std::vector<std::string> violations;
};

/// An iterative solver ran out of iterations. `residual_trail` holds the
/// residual after each accepted step, which is usually enough to see whether
/// the iteration was diverging, cycling, or just slow.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trail)
      : Error(what), residual_trail(std::move(trail)) {}
  std::vector<double> residual_trail;
  double final_residual() const {
    return residual_trail.empty() ? 0.0 : residual_trail.back();
  }
};

/// A sampling budget was exhausted before the requested precision was reached.
/// The best estimate obtained so far is attached.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, double best_estimate, double achieved)
      : Error(what), best_estimate(best_estimate), achieved_precision(achieved) {}
  double best_estimate;
  double achieved_precision;
};

/// A computed quantity failed an internal accuracy check (for example a
/// resolvent whose defect exceeds the contract tolerance).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

}  // namespace levyspec
