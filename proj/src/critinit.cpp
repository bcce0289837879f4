#include "rnnmf/critinit.hpp"

#include <cmath>
#include <string>

#include "rnnmf/activations.hpp"

namespace rnnmf {
namespace {

struct MinimalCandidate {
  double sigma_w2;
  double sigma_v2;
  double Q_star;
};

MinimalCandidate minimal_candidate(double q_star, double mu_b, double R, const Quadrature& rule) {
  const double u = rule.expect1([](double v) { return logistic(v); }, q_star, mu_b);
  const double mu1 = rule.expect1([](double v) { const double s = logistic(v); return s * s; }, q_star, mu_b);
  const double d2 = rule.expect1([](double v) { const double d = logistic_prime(v); return d * d; }, q_star, mu_b);
  if (!(mu1 < 1.0) || !(d2 > 0.0))
    throw InfeasibleError("critical_minimal: gate saturated (mu1 >= 1)", "mu1 < 1", mu1);
  MinimalCandidate c;
  c.Q_star = R * (1.0 - 2.0 * u + mu1) / (1.0 - mu1);
  c.sigma_w2 = (1.0 - mu1) / (c.Q_star + R) / d2;
  const double sigma_b2 = 0.0;
  c.sigma_v2 = (q_star - c.Q_star * c.sigma_w2 - sigma_b2) / R;
  return c;
}

bool feasible(double q_star, double mu_b, double R, const Quadrature& rule) {
  try {
    return minimal_candidate(q_star, mu_b, R, rule).sigma_v2 >= 0.0;
  } catch (const InfeasibleError&) {
    return false;
  }
}

}  // namespace

MinimalParams CriticalInit::minimal_params(double Sigma) const {
  return {sigma_w2, sigma_v2, sigma_b2, mu_b, R, Sigma};
}

VanillaParams CriticalInit::vanilla_params(double Sigma) const {
  return {sigma_w2, sigma_v2, sigma_b2, R, Sigma};
}

double minimum_feasible_q_star(double mu_b, double R, const Quadrature& rule) {
  if (!(R > 0.0)) throw DomainError("minimum_feasible_q_star: R must be positive");
  double lo = 1e-6;
  if (feasible(lo, mu_b, R, rule)) return lo;
  double hi = 1.0;
  while (!feasible(hi, mu_b, R, rule)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw InfeasibleError("no feasible q* below 1e6", "sigma_v2 >= 0", hi);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid, mu_b, R, rule) ? hi : lo) = mid;
  }
  return hi;
}

CriticalInit critical_minimal(double q_star, double mu_b, double R, const Quadrature& rule) {
  if (!(q_star > 0.0)) throw DomainError("critical_minimal: q* must be positive");
  if (!(R > 0.0)) throw DomainError("critical_minimal: R must be positive");
  const MinimalCandidate c = minimal_candidate(q_star, mu_b, R, rule);
  if (c.sigma_v2 < 0.0) {
    const double q_min = minimum_feasible_q_star(mu_b, R, rule);
    throw InfeasibleError("critical_minimal: q* too small for the given mu_b and R (sigma_v2 = " +
                              std::to_string(c.sigma_v2) + " < 0)",
                          "sigma_v2 >= 0", c.sigma_v2, q_min);
  }

  CriticalInit out;
  out.model = Model::minimal;
  out.sigma_w2 = c.sigma_w2;
  out.sigma_v2 = c.sigma_v2;
  out.sigma_b2 = 0.0;
  out.q_star = q_star;
  out.mu_b = mu_b;
  out.R = R;
  out.Q_star = c.Q_star;

  const MinimalMeanField mf(out.minimal_params(), {}, rule);
  const VarianceFixedPoint fp{c.Q_star, q_star};
  out.chi_1 = mf.chi_1(fp);
  out.fixed_point_residual = std::fabs(mf.Q_map(c.Q_star) - c.Q_star);
  out.Q_star_slope = mf.Q_map_slope(c.Q_star);
  out.Q_star_stable = out.Q_star_slope <= 1.0;
  return out;
}

CriticalInit critical_vanilla(double sigma_v2, double sigma_b2, double R, const Quadrature& rule) {
  if (!(sigma_v2 >= 0.0 && sigma_b2 >= 0.0 && R >= 0.0))
    throw DomainError("critical_vanilla: inputs must be non-negative");
  auto excess = [&](double sigma_w2) {
    const VanillaMeanField mf(VanillaParams{sigma_w2, sigma_v2, sigma_b2, R, 1.0}, {}, Activation::tanh(), rule);
    const double q = mf.solve_q_star();
    return mf.chi(1.0, q) - 1.0;
  };
  double lo = 1e-3;
  double hi = 10.0;
  double f_lo = excess(lo);
  const double f_hi = excess(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0))
    throw InfeasibleError("critical_vanilla: chi_1 - 1 has no sign change on sigma_w2 in [1e-3, 10]",
                          "chi_1(1e-3) < 1 < chi_1(10)", f_lo < 0.0 ? f_hi : f_lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = excess(mid);
    if (f == 0.0 || hi - lo <= 1e-15 * mid) {
      lo = hi = mid;
      break;
    }
    if (f < 0.0) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
    }
  }
  const double sigma_w2 = 0.5 * (lo + hi);

  CriticalInit out;
  out.model = Model::vanilla;
  out.sigma_w2 = sigma_w2;
  out.sigma_v2 = sigma_v2;
  out.sigma_b2 = sigma_b2;
  out.R = R;
  const VanillaMeanField mf(out.vanilla_params(), {}, Activation::tanh(), rule);
  out.q_star = mf.solve_q_star();
  out.chi_1 = mf.chi(1.0, out.q_star);
  out.fixed_point_residual = out.q_star == 0.0 ? 0.0 : std::fabs(mf.q_map(out.q_star) - out.q_star);
  return out;
}

}  // namespace rnnmf
