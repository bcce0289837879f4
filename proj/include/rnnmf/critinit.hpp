#pragma once

#include <optional>

#include "rnnmf/gauss.hpp"
#include "rnnmf/minimal.hpp"
#include "rnnmf/vanilla.hpp"

namespace rnnmf {

enum class Model { vanilla, minimal };

/// Distribution parameters of a critically initialized network (chi_1 = 1).
struct CriticalInit {
  Model model = Model::minimal;
  double sigma_w2 = 0.0;
  double sigma_v2 = 0.0;
  double sigma_b2 = 0.0;
  double q_star = 0.0;
  double R = 0.0;
  double mu_b = 0.0;
  std::optional<double> Q_star;  ///< hidden-state norm used to initialize h^0 (minimal only)

  /// chi_1 recomputed from the returned parameters.
  double chi_1 = 0.0;
  /// |Q_map(Q*) - Q*| (minimal) or |q_map(q*) - q*| (vanilla) under the returned parameters.
  double fixed_point_residual = 0.0;
  /// dQ_map/dQ at Q* (minimal only). Above 1 the returned Q* is a repelling fixed point:
  /// near the feasibility boundary the closed form can land on the middle root of a gated
  /// map with three fixed points.
  double Q_star_slope = 0.0;
  bool Q_star_stable = true;

  MinimalParams minimal_params(double Sigma = 1.0) const;
  VanillaParams vanilla_params(double Sigma = 1.0) const;
};

/// Closed-form critical initialization of the minimalRNN from a target q*.
/// Throws InfeasibleError (with the smallest feasible q*) when sigma_v2 would be negative.
CriticalInit critical_minimal(double q_star, double mu_b, double R,
                              const Quadrature& rule = Quadrature::standard());

/// Smallest q* for which critical_minimal is feasible at (mu_b, R), found by bisection.
double minimum_feasible_q_star(double mu_b, double R, const Quadrature& rule = Quadrature::standard());

/// sigma_w2 with chi_1(sigma_w2, q*(sigma_w2)) = 1 for the vanilla RNN, by bisection on [1e-3, 10].
CriticalInit critical_vanilla(double sigma_v2, double sigma_b2, double R,
                              const Quadrature& rule = Quadrature::standard());

}  // namespace rnnmf
