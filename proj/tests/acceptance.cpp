// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "rnnmf/activations.hpp"
#include "rnnmf/critinit.hpp"
#include "rnnmf/isometry.hpp"
#include "rnnmf/mcsim.hpp"
#include "rnnmf/minimal.hpp"
#include "rnnmf/vanilla.hpp"
#include "test_support.hpp"

using namespace rnnmf;
using testing::ref_point;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  fmt::print("{} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", name, o.detail, secs);
  std::fflush(stdout);
}

SimConfig minimal_config(const MinimalParams& p, int N, int T, int ensembles, std::uint64_t seed) {
  SimConfig c;
  c.model = Model::minimal;
  c.minimal = p;
  c.N = N;
  c.T = T;
  c.ensembles = ensembles;
  c.seed = seed;
  c.threads = 0;
  return c;
}

}  // namespace

int main() {
  criterion("reference weight scales are critical at mu_b=0 (|chi_1-1| <= 2e-2)", [] {
    const MinimalMeanField mf(ref_point(0.0));
    const double chi1 = mf.chi_1(mf.solve_variance_fixed_point());
    return Outcome{std::fabs(chi1 - 1.0) <= 2e-2, fmt::format("chi_1 = {:.6f}", chi1)};
  });

  criterion("untied MC vs theory, N=2048, 100 nets, step at t=10, mu_b in {-2,0,2,4} (max |dc| <= 0.02, t <= 50)",
            [] {
              double worst = 0.0;
              std::string per;
              for (double mu : {-2.0, 0.0, 2.0, 4.0}) {
                SimConfig c = minimal_config(ref_point(mu), 2048, 50, 100, 2024);
                c.sigma_schedule.assign(50, 0.0);
                for (int t = 10; t <= 50; ++t) c.sigma_schedule[static_cast<std::size_t>(t - 1)] = 1.0;
                const EnsembleTrace tr = run_forward(c);
                double w = 0.0;
                for (const TraceRow& r : tr.rows) w = std::fmax(w, std::fabs(r.c_mc - r.c_theory));
                per += fmt::format(" mu_b={:g}:{:.4f}", mu, w);
                worst = std::fmax(worst, w);
              }
              return Outcome{worst <= 0.02, fmt::format("worst {:.4f};{}", worst, per)};
            });

  criterion("linearization: chi(c*) vs finite-difference slope of the c map, 20 points per model (<= 1e-6)", [] {
    testing::Draw u(101);
    double worst_v = 0.0, worst_m = 0.0;
    for (int k = 0; k < 20; ++k) {
      const VanillaParams p = testing::random_vanilla(u);
      const VanillaMeanField mf(p);
      const VanillaFixedPoint fp = mf.solve_fixed_point();
      const double fd =
          testing::fd_slope([&](double c) { return mf.c_map(c, fp.q_star); }, fp.c_star, 1e-5, -1.0, 1.0);
      worst_v = std::fmax(worst_v, std::fabs(mf.chi(fp.c_star, fp.q_star) - fd));
    }
    for (int k = 0; k < 20; ++k) {
      const MinimalParams p = testing::random_minimal(u);
      const MinimalMeanField mf(p);
      const MinimalFixedPoint fp = mf.solve_fixed_point();
      const double fd = testing::fd_slope([&](double c) { return mf.c_map(c, p.Sigma, p.Sigma, fp); }, fp.c_star,
                                          1e-5, -1.0, 1.0);
      worst_m = std::fmax(worst_m, std::fabs(mf.chi(fp.c_star, fp) - fd));
    }
    return Outcome{worst_v <= 1e-6 && worst_m <= 1e-6,
                   fmt::format("worst vanilla {:.2e}, minimal {:.2e}", worst_v, worst_m)};
  });

  criterion("critical initialization round trip, 50 feasible inputs (chi_1 1e-8, residual 1e-8, q* identity 1e-10)",
            [] {
              testing::Draw u(202);
              // Independent 1D rule: 256 fixed panels on [-10, 10], not the standard engine.
              const Quadrature fine(composite_rule(256, 20, 10.0));
              double w_chi = 0.0, w_res = 0.0, w_id = 0.0;
              int repelling = 0;
              for (int k = 0; k < 50; ++k) {
                const auto in = testing::random_critinit_input(u);
                const CriticalInit ci = critical_minimal(in.q_star, in.mu_b, in.R);
                const MinimalParams p = ci.minimal_params();
                const double Q = *ci.Q_star;
                const double q = ci.q_star;
                const double gg = fine.expect1([](double v) { return logistic(v) * logistic(v); }, q, p.mu_b);
                const double dd =
                    fine.expect1([](double v) { return logistic_prime(v) * logistic_prime(v); }, q, p.mu_b);
                const double chi1 = gg + (q + (p.sigma_w2 - p.sigma_v2) * p.R - p.sigma_b2) * dd;
                const double in2 =
                    fine.expect1([](double v) { return logistic_complement(v) * logistic_complement(v); }, q, p.mu_b);
                w_chi = std::fmax(w_chi, std::fabs(chi1 - 1.0));
                w_res = std::fmax(w_res, std::fabs(Q * gg + p.R * in2 - Q));
                w_id = std::fmax(w_id, std::fabs(p.sigma_w2 * Q + p.sigma_v2 * p.R + p.sigma_b2 - q) /
                                           std::fmax(1.0, q));
                if (!ci.Q_star_stable) ++repelling;
              }
              return Outcome{w_chi <= 1e-8 && w_res <= 1e-8 && w_id <= 1e-10,
                             fmt::format("worst |chi_1-1| {:.2e}, residual {:.2e}, identity {:.2e}; "
                                         "{} of 50 returned Q* are repelling fixed points",
                                         w_chi, w_res, w_id, repelling)};
            });

  criterion("forward-backward duality: chi_1 = mu1 + mu2 on 20 points (<= 1e-8)", [] {
    testing::Draw u(303);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const MinimalParams p = testing::random_minimal(u);
      const MinimalMeanField mf(p);
      const VarianceFixedPoint fp = mf.solve_variance_fixed_point();
      worst = std::fmax(worst, std::fabs(chi1_backward(jacobian_moments(fp, p)) - mf.chi_1(fp)));
    }
    return Outcome{worst <= 1e-8, fmt::format("worst {:.2e}", worst)};
  });

  criterion("spectral variance at critical init (q*=4, mu_b=4, R=0.46), N=1024, T=32, 20 nets "
            "(mean 10%, variance 25%, linear-in-T R^2 >= 0.95)",
            [] {
              const CriticalInit ci = critical_minimal(4.0, 4.0, 0.46);
              SimConfig c = minimal_config(ci.minimal_params(), 1024, 32, 20, 4242);
              c.checkpoints = {8, 16, 32};
              c.eigenvalues = false;
              const SpectrumResult s = jacobian_spectrum(c);
              double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
              for (const SpectrumCheckpoint& cp : s.checkpoints) {
                const double x = cp.T, y = cp.variance;
                sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
              }
              const double n = 3.0;
              const double cov = sxy - sx * sy / n;
              const double r2 = cov * cov / ((sxx - sx * sx / n) * (syy - sy * sy / n));
              const SpectrumCheckpoint& last = s.checkpoints.back();
              const double mean_err = std::fabs(last.mean - 1.0);
              const double var_err = std::fabs(last.variance / *last.theory_variance - 1.0);
              std::string per;
              for (const SpectrumCheckpoint& cp : s.checkpoints)
                per += fmt::format(" T={}: var {:.3f}+-{:.3f} vs {:.3f}, second moment ratio {:.3f};", cp.T,
                                   cp.variance, cp.variance_stderr, *cp.theory_variance,
                                   cp.second_moment / *cp.theory_variance);
              return Outcome{mean_err <= 0.10 && var_err <= 0.25 && r2 >= 0.95,
                             fmt::format("mean {:.4f}, variance ratio {:.3f}, R^2 {:.4f};{}", last.mean,
                                         last.variance / *last.theory_variance, r2, per)};
            });

  criterion("gating saturation: chi_1(mu_b=30) within 1e-4 of 1 for Sigma in {0, 1}", [] {
    double worst = 0.0;
    for (double Sigma : {0.0, 1.0}) {
      const MinimalMeanField mf(ref_point(30.0, Sigma));
      const VarianceFixedPoint fp = mf.solve_variance_fixed_point();
      worst = std::fmax(worst, std::fabs(mf.chi_1(fp) - 1.0));
      for (double c : {0.0, 0.5, 1.0}) worst = std::fmax(worst, std::fabs(mf.chi(c, Sigma, fp) - 1.0));
    }
    return Outcome{worst <= 1e-4, fmt::format("worst |chi-1| {:.2e}", worst)};
  });

  criterion("vanilla one-step leak c_map(1) = 1 - sigma_v^2 R (1-Sigma)/q* (<= 1e-10)", [] {
    testing::Draw u(404);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const VanillaParams p = testing::random_vanilla(u);
      const VanillaMeanField mf(p);
      const double q = mf.solve_q_star();
      worst = std::fmax(worst, std::fabs(mf.c_map(1.0, q) - (1.0 - p.sigma_v2 * p.R * (1.0 - p.Sigma) / q)));
    }
    return Outcome{worst <= 1e-10, fmt::format("worst {:.2e}", worst)};
  });

  criterion("xi_Q: iterated Q map decay from Q*+1e-3 vs differentiated rate (1%)", [] {
    double worst = 0.0;
    std::string per;
    for (double mu : {-1.0, 0.0, 2.0, 4.0}) {
      const MinimalMeanField mf(ref_point(mu));
      const VarianceFixedPoint fp = mf.solve_variance_fixed_point();
      const DepthScale d = mf.xi_Q(fp);
      double Q = fp.Q_star + 1e-3;
      double prev = Q - fp.Q_star;
      double sum_log = 0.0;
      int steps = 0;
      for (int t = 0; t < 30 && std::fabs(prev) > 1e-10; ++t, ++steps) {
        Q = mf.Q_map(Q);
        const double dev = Q - fp.Q_star;
        sum_log += std::log(std::fabs(dev / prev));
        prev = dev;
      }
      const double rate = std::exp(sum_log / steps);
      worst = std::fmax(worst, std::fabs(rate / std::fabs(d.slope_oracle) - 1.0));
      per += fmt::format(" mu_b={:g}: xi_Q {:.4f}, closed form {:.4f} ({:+.1f}%);", mu, d.oracle, d.closed_form,
                         100.0 * (d.closed_form / d.oracle - 1.0));
    }
    return Outcome{worst <= 0.01, fmt::format("worst relative {:.2e};{}", worst, per)};
  });

  criterion("orthogonal vs Gaussian weights at critical init, mu_b=4: variance difference below combined stderr",
            [] {
              const CriticalInit ci = critical_minimal(4.0, 4.0, 0.46);
              SimConfig g = minimal_config(ci.minimal_params(), 512, 16, 20, 5151);
              g.eigenvalues = false;
              SimConfig o = g;
              o.weight_kind = WeightKind::orthogonal;
              const SpectrumCheckpoint a = jacobian_spectrum(g).checkpoints.back();
              const SpectrumCheckpoint b = jacobian_spectrum(o).checkpoints.back();
              const double diff = std::fabs(a.variance - b.variance);
              const double se = std::hypot(a.variance_stderr, b.variance_stderr);
              return Outcome{diff < se, fmt::format("gaussian {:.4f}+-{:.4f}, orthogonal {:.4f}+-{:.4f}, "
                                                    "|diff| {:.4f} vs {:.4f}",
                                                    a.variance, a.variance_stderr, b.variance, b.variance_stderr,
                                                    diff, se)};
            });

  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
