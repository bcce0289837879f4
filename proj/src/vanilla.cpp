#include "rnnmf/vanilla.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

namespace rnnmf {

void VanillaParams::validate() const {
  if (!(sigma_w2 >= 0.0 && sigma_v2 >= 0.0 && sigma_b2 >= 0.0))
    throw DomainError("vanilla: variances must be non-negative");
  if (!(R >= 0.0)) throw DomainError("vanilla: R must be non-negative");
  if (!(std::fabs(Sigma) <= 1.0)) throw DomainError("vanilla: Sigma must lie in [-1, 1]");
}

VanillaMeanField::VanillaMeanField(VanillaParams params, SolverOptions opts, Activation act,
                                   const Quadrature& rule)
    : p_(params), opts_(opts), act_(act), rule_(&rule) {
  p_.validate();
}

double VanillaMeanField::q_map(double q_prev) const {
  if (!(q_prev >= 0.0)) throw DomainError("vanilla q_map: q must be non-negative");
  const auto phi = act_.phi;
  const double e = rule_->expect1([phi](double z) { const double y = phi(z); return y * y; }, q_prev);
  return p_.sigma_w2 * e + p_.sigma_v2 * p_.R + p_.sigma_b2;
}

double VanillaMeanField::solve_q_star() const {
  const double drive = p_.sigma_v2 * p_.R + p_.sigma_b2;
  // Without input or bias drive E[phi^2] < q on q > 0, so sigma_w2 <= 1 leaves only q = 0.
  if (drive == 0.0 && p_.sigma_w2 <= 1.0) return 0.0;
  const double hi = p_.sigma_w2 + drive + 1.0;  // phi bounded by 1
  // Bracketed root: near sigma_w2 = 1 the map is almost neutral and plain iteration stalls
  // far from the root. Without drive, divide out the trivial root q = 0.
  std::function<double(double)> g;
  double lo = 0.0;
  if (drive == 0.0) {
    lo = 1e-200;
    g = [this](double q) { return q_map(q) / q - 1.0; };
  } else {
    g = [this](double q) { return q_map(q) - q; };
  }
  double g_lo = g(lo);
  double g_hi = g(hi);
  if (!(g_lo > 0.0 && g_hi < 0.0))
    throw ConvergenceError("vanilla: q* not bracketed", hi, g_hi, 0);
  boost::uintmax_t max_iter = 300;
  const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, g_lo, g_hi,
                                                        boost::math::tools::eps_tolerance<double>(52), max_iter);
  const double q = 0.5 * (a + b);
  const double residual = std::fabs(q_map(q) - q);
  if (residual > opts_.tolerance * std::fmax(1.0, q))
    throw ConvergenceError("vanilla: q* root solve did not converge", q, residual, static_cast<int>(max_iter));
  return q;
}

double VanillaMeanField::c_map(double c_prev, double q_star, double sigma_t) const {
  if (!(q_star > 0.0)) throw DegenerateStateError("vanilla c_map: q* = 0, cosine similarity undefined");
  const auto phi = act_.phi;
  const double e = rule_->expect2(phi, phi, GaussianMeasure{q_star, c_prev, 0.0});
  return (p_.sigma_w2 * e + p_.sigma_v2 * p_.R * sigma_t + p_.sigma_b2) / q_star;
}

double VanillaMeanField::chi(double c, double q_star) const {
  if (!(q_star >= 0.0)) throw DomainError("vanilla chi: q* must be non-negative");
  if (q_star == 0.0) return p_.sigma_w2 * act_.dphi(0.0) * act_.dphi(0.0);
  const auto dphi = act_.dphi;
  return p_.sigma_w2 * rule_->expect2(dphi, dphi, GaussianMeasure{q_star, c, 0.0});
}

VanillaFixedPoint VanillaMeanField::solve_fixed_point() const {
  VanillaFixedPoint fp;
  fp.q_star = solve_q_star();
  fp.chi_1 = chi(1.0, fp.q_star);
  if (fp.q_star == 0.0) {
    fp.degenerate = true;
    fp.converged = true;
    fp.c_star = 1.0;
    fp.chi_cstar = fp.chi_1;
    fp.tau = timescale_from_chi(fp.chi_cstar);
    return fp;
  }

  const CosineAttractor a = find_stable_cosine([&](double c) { return c_map(c, fp.q_star); },
                                               [&](double c) { return chi(c, fp.q_star); }, opts_,
                                               "vanilla");
  fp.c_star = a.value;
  fp.chi_cstar = a.slope;
  fp.multiple_fixed_points = a.multiple;
  fp.iterations = a.iterations;
  fp.tau = timescale_from_chi(fp.chi_cstar);
  fp.converged = true;
  return fp;
}

}  // namespace rnnmf
