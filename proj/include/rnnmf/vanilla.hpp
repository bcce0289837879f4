#pragma once

#include "rnnmf/activations.hpp"
#include "rnnmf/fixed_point.hpp"
#include "rnnmf/gauss.hpp"

namespace rnnmf {

/// Hyperparameters of h^t = W phi(h^{t-1}) + V x^t + b with W_ij ~ N(0, sigma_w2/N),
/// V_ij ~ N(0, sigma_v2/M), b_i ~ N(0, sigma_b2); inputs have norm R and cosine Sigma.
struct VanillaParams {
  double sigma_w2 = 1.0;
  double sigma_v2 = 0.0;
  double sigma_b2 = 0.0;
  double R = 1.0;
  double Sigma = 1.0;

  void validate() const;
};

struct VanillaFixedPoint {
  double q_star = 0.0;
  double c_star = 1.0;
  double chi_cstar = 0.0;
  double chi_1 = 0.0;
  double tau = 0.0;  ///< +infinity when chi_cstar is 1 to within 1e-12
  bool converged = false;
  /// The two seeds of the c iteration reached different stable points.
  bool multiple_fixed_points = false;
  /// q* = 0: the hidden state collapses and c-dynamics are undefined.
  bool degenerate = false;
  int iterations = 0;
};

class VanillaMeanField {
 public:
  explicit VanillaMeanField(VanillaParams params, SolverOptions opts = {},
                            Activation act = Activation::tanh(),
                            const Quadrature& rule = Quadrature::standard());

  const VanillaParams& params() const noexcept { return p_; }

  /// q^t from q^{t-1}.
  double q_map(double q_prev) const;
  double solve_q_star() const;

  /// c^t from c^{t-1} at the variance fixed point, with input cosine Sigma_t.
  double c_map(double c_prev, double q_star, double sigma_t) const;
  double c_map(double c_prev, double q_star) const { return c_map(c_prev, q_star, p_.Sigma); }

  /// Slope of the linearized c map: sigma_w2 E[phi'(z1) phi'(z2)].
  double chi(double c, double q_star) const;

  VanillaFixedPoint solve_fixed_point() const;

 private:
  VanillaParams p_;
  SolverOptions opts_;
  Activation act_;
  const Quadrature* rule_;
};

}  // namespace rnnmf
