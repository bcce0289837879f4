#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rnnmf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a map or integral (negative variance, |c| > 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A fixed-point or root solve ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_iterate, double residual, int iterations)
      : Error(what), last_iterate_(last_iterate), residual_(residual), iterations_(iterations) {}

  double last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_iterate_;
  double residual_;
  int iterations_;
};

/// The cosine-similarity dynamics are undefined because the variance fixed point is zero.
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

/// A critical initialization does not exist for the requested inputs.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::string constraint, double violation,
                  double min_feasible_q_star = -1.0)
      : Error(what),
        constraint_(std::move(constraint)),
        violation_(violation),
        min_feasible_q_star_(min_feasible_q_star) {}

  const std::string& constraint() const noexcept { return constraint_; }
  /// Value of the violated quantity (e.g. the negative sigma_v2).
  double violation() const noexcept { return violation_; }
  /// Smallest feasible q* for the same (mu_b, R), or a negative value when unknown.
  double min_feasible_q_star() const noexcept { return min_feasible_q_star_; }

 private:
  std::string constraint_;
  double violation_;
  double min_feasible_q_star_;
};

/// Simulation size exceeds the configured budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rnnmf
