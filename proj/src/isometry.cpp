#include "rnnmf/isometry.hpp"

#include <cmath>

#include "rnnmf/activations.hpp"

namespace rnnmf {

JacobianMoments jacobian_moments(const VarianceFixedPoint& fp, const MinimalParams& p,
                                 const Quadrature& rule) {
  const double q = fp.q_star;
  const double mu = p.mu_b;
  JacobianMoments m;
  m.mu1 = rule.expect1([](double v) { const double s = logistic(v); return s * s; }, q, mu);
  // Centered second pass so the gate variance cannot go negative through cancellation.
  m.var1 = rule.expect1(
      [&](double v) {
        const double s = logistic(v);
        const double d = s * s - m.mu1;
        return d * d;
      },
      q, mu);
  const double d2 = rule.expect1([](double v) { const double d = logistic_prime(v); return d * d; }, q, mu);
  const double d4 = rule.expect1(
      [](double v) {
        const double d = logistic_prime(v);
        return d * d * d * d;
      },
      q, mu);
  const double w2 = p.sigma_w2;
  const double Q = fp.Q_star;
  m.mu2 = w2 * (Q + p.R) * d2;
  m.var2 = -m.mu2 * m.mu2 + w2 * w2 * (Q * Q + p.R * p.R) * d4;
  return m;
}

double spectral_linear_coefficient(const JacobianMoments& m, double s1) {
  const double chi = chi1_backward(m);
  if (chi == 0.0) throw DomainError("spectral variance: chi_1 = 0");
  return (2.0 * (m.mu1 - s1) * m.mu2 + m.var1 + m.var2) / (chi * chi);
}

double spectral_variance(const JacobianMoments& m, double s1, int T) {
  if (T < 1) throw DomainError("spectral variance: T must be at least 1");
  const double chi = chi1_backward(m);
  const double coef = spectral_linear_coefficient(m, s1);
  return std::pow(chi, 2.0 * T) * (1.0 + T * coef);
}

SpectralPrediction predict_spectrum(const VarianceFixedPoint& fp, const MinimalParams& p,
                                    const WeightEnsemble& ensemble, int T, const Quadrature& rule) {
  SpectralPrediction s;
  s.T = T;
  s.moments = jacobian_moments(fp, p, rule);
  s.mean = std::pow(chi1_backward(s.moments), T);
  s.variance = spectral_variance(s.moments, ensemble.s1, T);
  return s;
}

}  // namespace rnnmf
