#pragma once

#include <cmath>

namespace rnnmf {

/// Logistic gate nonlinearity, numerically stable for large |x|.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logistic_prime(double x) {
  const double s = logistic(x);
  return s * (1.0 - s);
}

/// 1 - logistic(x) without cancellation.
inline double logistic_complement(double x) { return logistic(-x); }

inline double tanh_prime(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

/// Pointwise nonlinearity paired with its derivative.
struct Activation {
  double (*phi)(double);
  double (*dphi)(double);

  static Activation tanh() {
    return {[](double x) { return std::tanh(x); }, &tanh_prime};
  }
};

}  // namespace rnnmf
