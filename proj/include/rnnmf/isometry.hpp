#pragma once

#include "rnnmf/minimal.hpp"

namespace rnnmf {

enum class WeightKind { gaussian, orthogonal };

/// Recurrent weight ensemble and the first Taylor coefficient s1 of the S-transform of W W^T.
struct WeightEnsemble {
  WeightKind kind = WeightKind::gaussian;
  double s1 = -1.0;

  static WeightEnsemble of(WeightKind kind) {
    return {kind, kind == WeightKind::gaussian ? -1.0 : 0.0};
  }
};

/// Single-step moments of the state-to-state Jacobian at the fixed point.
/// mu1/var1 come from the gate D_u, mu2/var2 from the D_{sigma'(v)(h - z)} W term.
struct JacobianMoments {
  double mu1 = 0.0;
  double var1 = 0.0;
  double mu2 = 0.0;
  double var2 = 0.0;
};

struct SpectralPrediction {
  double mean = 0.0;      ///< chi_1^T
  double variance = 0.0;  ///< limiting spectral variance of J J^T
  int T = 1;
  JacobianMoments moments;
};

JacobianMoments jacobian_moments(const VarianceFixedPoint& fp, const MinimalParams& p,
                                 const Quadrature& rule = Quadrature::standard());

/// (1/N) E tr(J_t J_t^T) = mu1 + mu2.
inline double chi1_backward(const JacobianMoments& m) { return m.mu1 + m.mu2; }

/// Coefficient of T in the spectral variance: (2 (mu1 - s1) mu2 + var1 + var2) / chi_1^2.
double spectral_linear_coefficient(const JacobianMoments& m, double s1);

/// chi_1^{2T} (1 + T (2 (mu1 - s1) mu2 + var1 + var2) / chi_1^2) for untied weights.
double spectral_variance(const JacobianMoments& m, double s1, int T);

SpectralPrediction predict_spectrum(const VarianceFixedPoint& fp, const MinimalParams& p,
                                    const WeightEnsemble& ensemble, int T,
                                    const Quadrature& rule = Quadrature::standard());

}  // namespace rnnmf
