#pragma once

#include "rnnmf/fixed_point.hpp"
#include "rnnmf/gauss.hpp"

namespace rnnmf {

/// Hyperparameters of the minimalRNN
///   u^t = sigmoid(W h^{t-1} + V z^t + b),  h^t = u^t * h^{t-1} + (1 - u^t) * z^t
/// with W_ij ~ N(0, sigma_w2/N), V_ij ~ N(0, sigma_v2/N), b_i ~ N(mu_b, sigma_b2).
struct MinimalParams {
  double sigma_w2 = 1.0;
  double sigma_v2 = 1.0;
  double sigma_b2 = 0.0;
  double mu_b = 0.0;
  double R = 1.0;
  double Sigma = 1.0;

  void validate() const;
  /// Pre-activation variance q implied by a hidden-state variance Q.
  double q_of(double Q) const { return sigma_w2 * Q + sigma_v2 * R + sigma_b2; }
};

/// Variances and cosines of one timestep: hidden state (Q, C) and gate pre-activation (q, c).
struct MinimalState {
  double Q = 0.0;
  double C = 1.0;
  double q = 0.0;
  double c = 1.0;
};

struct VarianceFixedPoint {
  double Q_star = 0.0;
  double q_star = 0.0;
};

struct MinimalFixedPoint : VarianceFixedPoint {
  double c_star = 1.0;
  double C_star = 1.0;
  double chi_cstar = 0.0;
  double chi_1 = 0.0;
  double tau = 0.0;
  double xi_Q = 0.0;              ///< from the derivative of the Q map (ground truth)
  double xi_Q_closed_form = 0.0;  ///< the closed-form depth-scale expression, as published
  double J_plus = 0.0;
  double J_minus = 0.0;
  bool converged = false;
  bool multiple_fixed_points = false;
  int iterations = 0;
};

struct DepthScale {
  double closed_form = 0.0;       ///< xi_Q from the published closed form
  double oracle = 0.0;            ///< -1/log|dQ_map/dQ| from a central difference
  double slope_closed_form = 0.0;
  double slope_oracle = 0.0;
};

class MinimalMeanField {
 public:
  explicit MinimalMeanField(MinimalParams params, SolverOptions opts = {},
                            const Quadrature& rule = Quadrature::standard());

  const MinimalParams& params() const noexcept { return p_; }
  const Quadrature& rule() const noexcept { return *rule_; }

  /// Q^t from Q^{t-1} through the diagonal recurrence.
  double Q_map(double Q_prev) const;
  /// Transcendental fixed-point condition F(Q); F(Q*) = 0.
  double fixed_point_condition(double Q) const;
  /// dQ_map/dQ, exact (Stein's lemma on the q-dependence).
  double Q_map_slope(double Q) const;
  /// A stable root of Q_map(Q) = Q in (0, R]. Gated maps can have several roots; when the
  /// bracketed root has slope above 1 the search continues below it.
  double solve_Q_star() const;
  VarianceFixedPoint solve_variance_fixed_point() const;

  /// Pre-activation cosine recurrence at the variance fixed point:
  /// c^t from c^{t-1} given input cosines Sigma^{t-1} and Sigma^t.
  double c_map(double c_prev, double sigma_prev, double sigma_cur, const VarianceFixedPoint& fp) const;
  /// Hidden-state cosine recurrence: C^t from C^{t-1} given Sigma^t.
  /// Also returns the gate pre-activation cosine c^t it passes through.
  MinimalState hidden_step(double C_prev, double sigma_cur, const VarianceFixedPoint& fp) const;

  /// Slope of the linearized c map at correlation c for constant input cosine sigma.
  double chi(double c, double sigma, const VarianceFixedPoint& fp) const;
  double chi(double c, const VarianceFixedPoint& fp) const { return chi(c, p_.Sigma, fp); }
  /// chi at c = 1 with Sigma = 1: the order-to-chaos multiplier.
  double chi_1(const VarianceFixedPoint& fp) const { return chi(1.0, 1.0, fp); }

  DepthScale xi_Q(const VarianceFixedPoint& fp) const;

  MinimalFixedPoint solve_fixed_point() const;

  double J_plus(const VarianceFixedPoint& fp) const;
  double J_minus(const VarianceFixedPoint& fp) const;

 private:
  double Q_map_unchecked(double Q_prev) const;

  MinimalParams p_;
  SolverOptions opts_;
  const Quadrature* rule_;
};

}  // namespace rnnmf
