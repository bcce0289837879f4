#include "rnnmf/minimal.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>

#include "rnnmf/activations.hpp"

namespace rnnmf {
namespace {

double sq(double x) { return x * x; }

constexpr auto sig = [](double v) { return logistic(v); };
constexpr auto sig_c = [](double v) { return logistic_complement(v); };
constexpr auto dsig = [](double v) { return logistic_prime(v); };

}  // namespace

void MinimalParams::validate() const {
  if (!(sigma_w2 >= 0.0 && sigma_v2 >= 0.0 && sigma_b2 >= 0.0))
    throw DomainError("minimal: variances must be non-negative");
  if (!(R >= 0.0)) throw DomainError("minimal: R must be non-negative");
  if (!(std::fabs(Sigma) <= 1.0)) throw DomainError("minimal: Sigma must lie in [-1, 1]");
  if (!std::isfinite(mu_b)) throw DomainError("minimal: mu_b must be finite");
}

MinimalMeanField::MinimalMeanField(MinimalParams params, SolverOptions opts, const Quadrature& rule)
    : p_(params), opts_(opts), rule_(&rule) {
  p_.validate();
}

double MinimalMeanField::Q_map_unchecked(double Q_prev) const {
  const double q = p_.q_of(Q_prev);
  const double gate = rule_->expect1([](double v) { return sq(logistic(v)); }, q, p_.mu_b);
  const double input = rule_->expect1([](double v) { return sq(logistic_complement(v)); }, q, p_.mu_b);
  return Q_prev * gate + p_.R * input;
}

double MinimalMeanField::Q_map(double Q_prev) const {
  if (!(Q_prev >= 0.0)) throw DomainError("minimal Q_map: Q must be non-negative");
  return Q_map_unchecked(Q_prev);
}

double MinimalMeanField::fixed_point_condition(double Q) const {
  const double q = p_.q_of(Q);
  const double num = rule_->expect1([](double v) { return sq(logistic_complement(v)); }, q, p_.mu_b);
  const double den = rule_->expect1(
      [](double v) { return logistic_complement(v) * (1.0 + logistic(v)); }, q, p_.mu_b);
  return num / den - Q / p_.R;
}

double MinimalMeanField::Q_map_slope(double Q) const {
  if (!(Q >= 0.0)) throw DomainError("minimal Q_map_slope: Q must be non-negative");
  const double q = p_.q_of(Q);
  const double QR = Q + p_.R;
  const double R = p_.R;
  // d/dq E[f(v)] = E[f''(v)] / 2 with f = Q s^2 + R (1 - s)^2.
  return rule_->expect1(
      [&](double v) {
        const double s = logistic(v);
        const double d = logistic_prime(v);
        return s * s + p_.sigma_w2 * (d * (1.0 - 2.0 * s) * (QR * s - R) + QR * d * d);
      },
      q, p_.mu_b);
}

double MinimalMeanField::solve_Q_star() const {
  if (!(p_.R > 0.0)) throw DomainError("minimal: the Q* fixed point requires R > 0");
  // G(Q) = Q_map(Q) - Q written without cancellation: R E[(1-s)^2] - Q E[1-s^2].
  // G(0) > 0 and G(R) = -2R E[s(1-s)] < 0, so [0, R] brackets a root.
  auto G = [this](double Q) {
    const double q = p_.q_of(Q);
    const double in = rule_->expect1([](double v) { return sq(logistic_complement(v)); }, q, p_.mu_b);
    const double leak = rule_->expect1(
        [](double v) { return logistic_complement(v) * (1.0 + logistic(v)); }, q, p_.mu_b);
    return p_.R * in - Q * leak;
  };
  double lo = 0.0;
  double hi = p_.R;
  const double g_lo = G(lo);
  double g_hi = G(hi);
  if (g_hi >= 0.0) {
    // Gates fully open within rounding: Q_map(R) = R.
    return p_.R;
  }
  double Q = 0.0;
  for (int round = 0;; ++round) {
    std::uintmax_t max_iter = 300;
    boost::math::tools::eps_tolerance<double> tol(52);
    auto [a, b] = boost::math::tools::toms748_solve(G, lo, hi, g_lo, g_hi, tol, max_iter);
    Q = std::fabs(G(a)) <= std::fabs(G(b)) ? a : b;
    if (Q_map_slope(Q) <= 1.0 || round == 50) break;
    // Repelling root: G rises through it, so G < 0 just below and a root lies in (0, Q).
    const double below = Q * (1.0 - 1e-9) - 1e-15;
    const double g_below = below > 0.0 ? G(below) : 1.0;
    if (!(g_below < 0.0)) break;
    hi = below;
    g_hi = g_below;
  }

  const double residual = std::fabs(Q_map(Q) - Q);
  if (!(residual <= opts_.tolerance))
    throw ConvergenceError("minimal: Q* residual above tolerance", Q, residual, 0);
  const double F = fixed_point_condition(Q);
  if (!(std::fabs(F) <= 1e-8))
    throw ConvergenceError("minimal: transcendental condition not satisfied at Q*", Q, std::fabs(F), 0);
  return Q;
}

VarianceFixedPoint MinimalMeanField::solve_variance_fixed_point() const {
  const double Q = solve_Q_star();
  return {Q, p_.q_of(Q)};
}

double MinimalMeanField::J_plus(const VarianceFixedPoint& fp) const {
  return (p_.sigma_w2 + p_.sigma_v2) * p_.R / fp.q_star;
}

double MinimalMeanField::J_minus(const VarianceFixedPoint& fp) const {
  return (p_.sigma_w2 - p_.sigma_v2) * p_.R / fp.q_star;
}

double MinimalMeanField::c_map(double c_prev, double sigma_prev, double sigma_cur,
                               const VarianceFixedPoint& fp) const {
  if (!(fp.q_star > 0.0)) throw DegenerateStateError("minimal c_map: q* = 0, cosine similarity undefined");
  const GaussianMeasure m{fp.q_star, c_prev, p_.mu_b};
  const double gg = rule_->expect2(sig, sig, m);
  const double g = rule_->expect1(sig, fp.q_star, p_.mu_b);
  const double jp = J_plus(fp);
  const double jm = J_minus(fp);
  // The bias term vanishes for sigma_b2 = 0.
  return (c_prev + jm * sigma_prev) * gg - (jp + jm) * sigma_prev * g +
         0.5 * ((jp + jm) * sigma_prev + (jp - jm) * sigma_cur) + p_.sigma_b2 * (1.0 - gg) / fp.q_star;
}

MinimalState MinimalMeanField::hidden_step(double C_prev, double sigma_cur, const VarianceFixedPoint& fp) const {
  if (!(fp.q_star > 0.0 && fp.Q_star > 0.0))
    throw DegenerateStateError("minimal hidden_step: degenerate variance fixed point");
  MinimalState s;
  s.Q = fp.Q_star;
  s.q = fp.q_star;
  s.c = Quadrature::clamp_correlation(
      (p_.sigma_w2 * fp.Q_star * C_prev + p_.sigma_v2 * p_.R * sigma_cur + p_.sigma_b2) / fp.q_star);
  const GaussianMeasure m{fp.q_star, s.c, p_.mu_b};
  const double gg = rule_->expect2(sig, sig, m);
  const double hh = rule_->expect2(sig_c, sig_c, m);
  s.C = C_prev * gg + (p_.R / fp.Q_star) * sigma_cur * hh;
  return s;
}

double MinimalMeanField::chi(double c, double sigma, const VarianceFixedPoint& fp) const {
  const GaussianMeasure m{fp.q_star, c, p_.mu_b};
  const double gg = rule_->expect2(sig, sig, m);
  const double dd = rule_->expect2(dsig, dsig, m);
  const double lin = fp.q_star * c + (p_.sigma_w2 - p_.sigma_v2) * p_.R * sigma - p_.sigma_b2;
  return gg + lin * dd;
}

DepthScale MinimalMeanField::xi_Q(const VarianceFixedPoint& fp) const {
  if (!(fp.q_star > 0.0)) throw DegenerateStateError("minimal xi_Q: q* = 0");
  DepthScale d;
  const double Q = fp.Q_star;
  const double R = p_.R;
  const double k = p_.sigma_w2 / std::sqrt(fp.q_star);
  d.slope_closed_form = rule_->expect1(
      [&](double v) {
        const double s = logistic(v);
        return s * s + k * ((Q + R) * s - R) * logistic_prime(v);
      },
      fp.q_star, p_.mu_b);

  const double h = 1e-5;
  const bool central = p_.q_of(Q - h) >= 0.0;
  d.slope_oracle = central ? (Q_map_unchecked(Q + h) - Q_map_unchecked(Q - h)) / (2.0 * h)
                           : (Q_map_unchecked(Q + h) - Q_map_unchecked(Q)) / h;
  d.closed_form = timescale_from_chi(d.slope_closed_form);
  d.oracle = timescale_from_chi(d.slope_oracle);
  return d;
}

MinimalFixedPoint MinimalMeanField::solve_fixed_point() const {
  MinimalFixedPoint fp;
  static_cast<VarianceFixedPoint&>(fp) = solve_variance_fixed_point();
  if (!(fp.q_star > 0.0)) throw DegenerateStateError("minimal: q* = 0, cosine dynamics undefined");
  const VarianceFixedPoint vfp = fp;
  const double sigma = p_.Sigma;

  const CosineAttractor a = find_stable_cosine(
      [&](double c) { return c_map(c, sigma, sigma, vfp); }, [&](double c) { return chi(c, sigma, vfp); },
      opts_, "minimal");
  fp.c_star = a.value;
  fp.chi_cstar = a.slope;
  fp.multiple_fixed_points = a.multiple;
  fp.iterations = a.iterations;
  fp.tau = timescale_from_chi(fp.chi_cstar);
  fp.chi_1 = chi_1(vfp);
  fp.J_plus = J_plus(vfp);
  fp.J_minus = J_minus(vfp);

  const double wq = p_.sigma_w2 * fp.Q_star;
  if (wq > 1e-8) {
    fp.C_star = (fp.q_star * fp.c_star - p_.sigma_v2 * p_.R * sigma - p_.sigma_b2) / wq;
  } else {
    const GaussianMeasure m{fp.q_star, fp.c_star, p_.mu_b};
    const double gg = rule_->expect2(sig, sig, m);
    const double hh = rule_->expect2(sig_c, sig_c, m);
    fp.C_star = (p_.R / fp.Q_star) * sigma * hh / (1.0 - gg);
  }
  fp.C_star = std::clamp(fp.C_star, -1.0, 1.0);

  const DepthScale d = xi_Q(vfp);
  fp.xi_Q = d.oracle;
  fp.xi_Q_closed_form = d.closed_form;
  fp.converged = true;
  return fp;
}

}  // namespace rnnmf
