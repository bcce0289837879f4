#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace rnnmf {

struct SolverOptions {
  double damping = 0.5;      ///< x <- (1 - damping) x + damping map(x)
  int max_iterations = 10000;
  double tolerance = 1e-12;  ///< on |map(x) - x|
  bool accelerate = true;    ///< Steffensen steps once the damped iteration contracts slowly
};

struct FixedPointResult {
  double value = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Damped fixed-point iteration of a scalar map restricted to [lo, hi].
///
/// When successive residuals shrink by a factor in (0.5, 1) the iteration is
/// linearly convergent but slow (multiplier near 1); a Steffensen extrapolation
/// of the damped map is then tried and kept only if it lowers the residual.
/// Acceleration never engages on a diverging sequence, so the iteration still
/// selects the attractor reached from x0.
FixedPointResult iterate_fixed_point(const std::function<double(double)>& map, double x0,
                                     const SolverOptions& opts, double lo, double hi);

/// Stable fixed point of a cosine-similarity map on [-1, 1].
struct CosineAttractor {
  double value = 1.0;
  double slope = 0.0;
  bool multiple = false;  ///< both seeds stable but at different points
  int iterations = 0;
};

/// Iterates `map` from c0 = 0 and from c0 = 1 - 1e-6 and keeps a seed whose
/// limit is stable (slope <= 1); prefers the seed at 0. Throws ConvergenceError
/// when neither seed reaches a stable fixed point.
CosineAttractor find_stable_cosine(const std::function<double(double)>& map,
                                   const std::function<double(double)>& slope,
                                   const SolverOptions& opts, const char* what);

/// -1/log|chi|; +infinity when |chi| is within 1e-12 of 1 or above it.
double timescale_from_chi(double chi);

}  // namespace rnnmf
