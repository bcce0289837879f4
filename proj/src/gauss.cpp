#include "rnnmf/gauss.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>

namespace rnnmf {
namespace {

// Orthonormal probabilists' Hermite recurrence
//   p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1),
// rescaled on the fly so large |x| does not overflow. Returns p_n(x) and
// p_{n-1}(x) with a common factor exp(log_scale) removed.
struct HermiteTail {
  double p_n;
  double p_nm1;
  double log_scale;
};

HermiteTail hermite_tail(int n, double x) {
  double prev = 0.0;
  double cur = 1.0;
  double log_scale = 0.0;
  for (int k = 0; k < n; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
    prev = cur;
    cur = next;
    if (std::fabs(cur) > 1e150) {
      prev *= 1e-150;
      cur *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
  }
  return {cur, prev, log_scale};
}

}  // namespace

struct LegendreValue {
  double p;
  double dp;
};

LegendreValue legendre(int n, double x) {
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return {cur, n * (x * cur - prev) / (x * x - 1.0)};
}

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double xi = solver.eigenvalues()[i];
    for (int it = 0; it < 6; ++it) {
      const LegendreValue v = legendre(n, xi);
      const double step = v.p / v.dp;
      xi -= step;
      if (std::fabs(step) <= 1e-16) break;
    }
    const LegendreValue v = legendre(n, xi);
    x[i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * v.dp * v.dp);
  }
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double xs = 0.5 * (x[j] - x[i]);
    const double ws = 0.5 * (w[i] + w[j]);
    x[i] = -xs;
    x[j] = xs;
    w[i] = w[j] = ws;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

constexpr double kHalfWidth = 9.0;
constexpr int kPointsPerPanel = 20;
constexpr int kMinPanels = 8;
constexpr int kMaxPanels = 2048;
constexpr double kPi = 3.14159265358979323846;

QuadratureRule gauss_hermite_rule(int order) {
  if (order < 1) throw DomainError("gauss_hermite_rule: order must be positive");
  const int n = order;
  QuadratureRule rule;
  std::vector<double>& nodes = rule.nodes;
  std::vector<double>& weights = rule.weights;

  // Golub-Welsch starting values: eigenvalues of the Jacobi matrix.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = solver.eigenvalues();

  nodes.resize(n);
  weights.resize(n);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    double xi = x[i];
    // Newton polish: p_n' = sqrt(n) p_{n-1}.
    for (int it = 0; it < 6; ++it) {
      const HermiteTail t = hermite_tail(n, xi);
      const double step = t.p_n / (sqrt_n * t.p_nm1);
      xi -= step;
      if (std::fabs(step) <= 1e-16 * std::max(1.0, std::fabs(xi))) break;
    }
    // Christoffel-Darboux at a root: sum_{k<n} p_k^2 = n p_{n-1}^2.
    const HermiteTail t = hermite_tail(n, xi);
    const double log_p = std::log(std::fabs(t.p_nm1)) + t.log_scale;
    nodes[i] = xi;
    weights[i] = std::exp(-2.0 * log_p) / n;
  }

  // Enforce exact reflection symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double xs = 0.5 * (nodes[j] - nodes[i]);
    const double ws = 0.5 * (weights[i] + weights[j]);
    nodes[i] = -xs;
    nodes[j] = xs;
    weights[i] = weights[j] = ws;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule composite_rule(int panels, int points, double half_width) {
  if (panels < 1 || points < 1 || !(half_width > 0.0))
    throw DomainError("composite_rule: panels, points and half width must be positive");
  std::vector<double> x, w;
  gauss_legendre(points, x, w);
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * points);
  rule.weights.reserve(rule.nodes.capacity());
  const double h = 2.0 * half_width / panels;
  const double norm = 1.0 / std::sqrt(2.0 * kPi);
  for (int p = 0; p < panels; ++p) {
    const double mid = -half_width + h * (p + 0.5);
    for (int i = 0; i < points; ++i) {
      const double xi = mid + 0.5 * h * x[i];
      rule.nodes.push_back(xi);
      rule.weights.push_back(0.5 * h * w[i] * norm * std::exp(-0.5 * xi * xi));
    }
  }
  return rule;
}

Quadrature::Quadrature() = default;

Quadrature::Quadrature(QuadratureRule fixed) : fixed_(std::move(fixed)) {
  if (fixed_->nodes.empty() || fixed_->nodes.size() != fixed_->weights.size())
    throw DomainError("Quadrature: rule must have matching, non-empty nodes and weights");
}

const Quadrature& Quadrature::standard() {
  static const Quadrature engine;
  return engine;
}

const Quadrature& Quadrature::gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Quadrature>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<Quadrature>(gauss_hermite_rule(order));
  return *slot;
}

const QuadratureRule& Quadrature::rule_for_scale(double s) const {
  if (fixed_) return *fixed_;
  const double want = std::ceil(2.0 * kHalfWidth * s / kPi);
  const int panels = want >= kMaxPanels ? kMaxPanels : std::max(kMinPanels, static_cast<int>(want));
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = by_panels_[panels];
  if (!slot) slot = std::make_unique<QuadratureRule>(composite_rule(panels, kPointsPerPanel, kHalfWidth));
  return *slot;
}

double Quadrature::clamp_correlation(double c) {
  if (!(std::fabs(c) <= 1.0 + kCorrelationSlack))
    throw DomainError("correlation outside [-1, 1]");
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace rnnmf
