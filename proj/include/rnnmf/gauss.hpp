#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "rnnmf/errors.hpp"

namespace rnnmf {

/// Bivariate normal with equal variances: (z1, z2) have variance q, correlation c and mean mu.
struct GaussianMeasure {
  double q = 1.0;
  double c = 0.0;
  double mu = 0.0;
};

/// Correlations this close to +-1 are clamped; anything further out is a DomainError.
inline constexpr double kCorrelationSlack = 1e-12;

inline constexpr int kDefaultQuadratureOrder = 128;

/// Nodes and weights for E[f(x)], x ~ N(0, 1): sum_i w_i f(x_i).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Gauss-Hermite rule for the weight exp(-x^2/2)/sqrt(2 pi).
QuadratureRule gauss_hermite_rule(int order);

/// Gauss-Legendre on `panels` equal panels of [-half_width, half_width], `points` nodes
/// each, with the normal density folded into the weights.
QuadratureRule composite_rule(int panels, int points, double half_width);

/// Expectations of functions of one or two correlated Gaussians.
///
/// The standard engine picks a composite rule per call from the scale s = sqrt(q): panels
/// no wider than pi/s keep the complex poles of tanh and the logistic outside the
/// convergence region, so accuracy does not degrade as q grows. An engine built from a
/// fixed rule (e.g. Gauss-Hermite) uses that rule at every scale.
///
/// Rule tables are immutable once built; engines may be shared between threads.
class Quadrature {
 public:
  explicit Quadrature(QuadratureRule fixed);

  static const Quadrature& standard();
  /// Shared Gauss-Hermite engine of the given order.
  static const Quadrature& gauss_hermite(int order = kDefaultQuadratureOrder);

  bool adaptive() const noexcept { return !fixed_; }
  /// Rule used for an integrand f(s x + mu).
  const QuadratureRule& rule_for_scale(double s) const;

  /// E[f(sqrt(q) x + mu)] for x ~ N(0, 1).
  template <class F>
  double expect1(F&& f, double q, double mu = 0.0) const {
    if (!(q >= 0.0)) throw DomainError("expect1: variance must be non-negative");
    const double s = std::sqrt(q);
    const QuadratureRule& r = rule_for_scale(s);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * f(s * r.nodes[i] + mu);
    return acc;
  }

  /// E[f(z1) g(z2)] under the measure m, evaluated on the whitened variables
  /// z1 = sqrt(q) x1 + mu, z2 = sqrt(q) (c x1 + sqrt(1 - c^2) x2) + mu.
  template <class F, class G>
  double expect2(F&& f, G&& g, const GaussianMeasure& m) const {
    if (!(m.q >= 0.0)) throw DomainError("expect2: variance must be non-negative");
    const double c = clamp_correlation(m.c);
    const double s = std::sqrt(m.q);
    const double a = s * c;
    const double b = s * std::sqrt(std::fmax(0.0, 1.0 - c * c));
    const QuadratureRule& outer = rule_for_scale(s);
    const QuadratureRule& inner = rule_for_scale(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < outer.nodes.size(); ++i) {
      const double x1 = outer.nodes[i];
      const double base = a * x1 + m.mu;
      double in = 0.0;
      for (std::size_t j = 0; j < inner.nodes.size(); ++j) in += inner.weights[j] * g(base + b * inner.nodes[j]);
      acc += outer.weights[i] * f(s * x1 + m.mu) * in;
    }
    return acc;
  }

  /// Returns c clamped into [-1, 1]; throws when |c| exceeds 1 by more than kCorrelationSlack.
  static double clamp_correlation(double c);

 private:
  Quadrature();

  std::optional<QuadratureRule> fixed_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::unique_ptr<QuadratureRule>> by_panels_;
};

template <class F>
double expect1(F&& f, double q, double mu = 0.0) {
  return Quadrature::standard().expect1(std::forward<F>(f), q, mu);
}

template <class F, class G>
double expect2(F&& f, G&& g, const GaussianMeasure& m) {
  return Quadrature::standard().expect2(std::forward<F>(f), std::forward<G>(g), m);
}

}  // namespace rnnmf
