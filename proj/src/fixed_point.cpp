#include "rnnmf/fixed_point.hpp"

namespace rnnmf {

FixedPointResult iterate_fixed_point(const std::function<double(double)>& map, double x0,
                                     const SolverOptions& opts, double lo, double hi) {
  const double lambda = opts.damping;
  auto damped = [&](double x, double fx) { return std::clamp((1.0 - lambda) * x + lambda * fx, lo, hi); };

  FixedPointResult out;
  double x = std::clamp(x0, lo, hi);
  double prev_residual = std::numeric_limits<double>::infinity();
  double prev_ratio = -1.0;
  double best_residual = std::numeric_limits<double>::infinity();
  double rho = -1.0;  // contraction ratio of the damped map, < 0 while unknown
  int steady_steps = 0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    const double fx = map(x);
    const double r = std::fabs(fx - x);
    out.value = x;
    out.residual = r;
    out.iterations = it;
    if (r <= opts.tolerance) {
      out.converged = true;
      return out;
    }
    best_residual = std::min(best_residual, r);
    // Linear regime: contraction ratio in (0.5, 1) and stable from step to step.
    const double ratio = r / prev_residual;
    const bool steady = ratio > 0.5 && ratio < 1.0 && std::fabs(ratio - prev_ratio) < 0.05 * (1.0 - ratio) + 1e-3;
    steady_steps = steady ? steady_steps + 1 : 0;
    prev_residual = r;
    prev_ratio = ratio;
    if (steady_steps >= 3) rho = ratio;

    double next = damped(x, fx);
    if (opts.accelerate && rho > 0.0) {
      // Sum of the remaining geometric tail of damped steps. The ratio is measured
      // while residuals are large and reused, since successive differences of nearly
      // converged iterates lose it to cancellation.
      const double xa = x + lambda * (fx - x) / (1.0 - rho);
      bool accepted = false;
      if (xa >= lo && xa <= hi) {
        const double ra = std::fabs(map(xa) - xa);
        if (ra < best_residual) {
          next = xa;
          accepted = true;
          prev_residual = std::numeric_limits<double>::infinity();
          prev_ratio = -1.0;
          steady_steps = 0;
        }
      }
      if (!accepted) rho = -1.0;
    }
    x = next;
  }
  const double fx = map(x);
  out.value = x;
  out.residual = std::fabs(fx - x);
  out.iterations = opts.max_iterations;
  out.converged = out.residual <= opts.tolerance;
  return out;
}

}  // namespace rnnmf

#include <string>

#include "rnnmf/errors.hpp"

namespace rnnmf {

CosineAttractor find_stable_cosine(const std::function<double(double)>& map,
                                   const std::function<double(double)>& slope,
                                   const SolverOptions& opts, const char* what) {
  const double seeds[2] = {0.0, 1.0 - 1e-6};
  FixedPointResult runs[2];
  double slopes[2] = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    runs[k] = iterate_fixed_point(map, seeds[k], opts, -1.0, 1.0);
    if (runs[k].converged) slopes[k] = slope(runs[k].value);
  }
  auto stable = [&](int k) { return runs[k].converged && std::fabs(slopes[k]) <= 1.0 + 1e-12; };
  const int pick = stable(0) ? 0 : (stable(1) ? 1 : -1);
  if (pick < 0) {
    const int k = runs[0].residual <= runs[1].residual ? 0 : 1;
    throw ConvergenceError(std::string(what) + ": no stable c* reached from either seed",
                           runs[k].value, runs[k].residual, runs[k].iterations);
  }
  CosineAttractor out;
  out.value = runs[pick].value;
  out.slope = slopes[pick];
  out.multiple = stable(0) && stable(1) && std::fabs(runs[0].value - runs[1].value) > 1e-8;
  out.iterations = runs[0].iterations + runs[1].iterations;
  return out;
}

double timescale_from_chi(double chi) {
  const double a = std::fabs(chi);
  if (std::fabs(a - 1.0) <= 1e-12 || a > 1.0) return std::numeric_limits<double>::infinity();
  if (a == 0.0) return 0.0;
  return -1.0 / std::log(a);
}

}  // namespace rnnmf
