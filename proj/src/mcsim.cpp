#include "rnnmf/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rnnmf/activations.hpp"

namespace rnnmf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum Stream : std::uint64_t { kInputs = 1, kInitial = 2, kWeights = 3 };

VectorXd gaussian_vector(int n, Rng& rng) {
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

double cosine(const VectorXd& a, const VectorXd& b) {
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return a.dot(b) / std::sqrt(na * nb);
}

/// Pair of inputs with per-coordinate variance R and correlation sigma.
void sample_inputs(double R, double sigma, Rng& rng, VectorXd& za, VectorXd& zb) {
  std::normal_distribution<double> nd;
  const double s = std::sqrt(R);
  const double r = std::sqrt(std::fmax(0.0, 1.0 - sigma * sigma));
  for (Eigen::Index i = 0; i < za.size(); ++i) {
    const double g1 = nd(rng);
    const double g2 = nd(rng);
    za[i] = s * g1;
    zb[i] = s * (sigma * g1 + r * g2);
  }
}

/// (A xa, A xb) for a fresh A with iid N(0, sigma2/N) entries, drawn from the exact
/// conditional law: per row the pair is Gaussian with covariance sigma2 Gram(xa, xb) / N.
void project_pair(const VectorXd& xa, const VectorXd& xb, double sigma2, Rng& rng, VectorXd& ya,
                  VectorXd& yb) {
  const double n = static_cast<double>(xa.size());
  const double gaa = sigma2 * xa.squaredNorm() / n;
  const double gab = sigma2 * xa.dot(xb) / n;
  const double gbb = sigma2 * xb.squaredNorm() / n;
  const double l11 = std::sqrt(gaa);
  const double l21 = l11 > 0.0 ? gab / l11 : 0.0;
  const double l22 = std::sqrt(std::fmax(0.0, gbb - l21 * l21));
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < xa.size(); ++i) {
    const double g1 = nd(rng);
    const double g2 = nd(rng);
    ya[i] = l11 * g1;
    yb[i] = l21 * g1 + l22 * g2;
  }
}

/// Two initial states with squared norm N * target and the requested cosine.
void initial_pair(int N, double target, double cosine0, Rng& rng, VectorXd& ha, VectorXd& hb) {
  const double norm = std::sqrt(target * N);
  VectorXd g = gaussian_vector(N, rng);
  ha = g * (norm / g.norm());
  if (cosine0 == 1.0) {
    hb = ha;
    return;
  }
  VectorXd e = ha / norm;
  VectorXd g2 = gaussian_vector(N, rng);
  g2 -= e * e.dot(g2);
  g2 *= norm / g2.norm();
  hb = cosine0 * ha + std::sqrt(std::fmax(0.0, 1.0 - cosine0 * cosine0)) * g2;
}

struct Moments {
  double mean = 0.0;
  double stderr_ = 0.0;
};

Moments summarize(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

struct MemberTrace {
  std::vector<double> q, c, Q, C;
};

bool uses_dense_forward(const SimConfig& cfg) {
  return cfg.tied || cfg.dense || cfg.weight_kind == WeightKind::orthogonal;
}

MemberTrace forward_member(const SimConfig& cfg, int member, double h0_target) {
  const int N = cfg.N;
  const bool minimal = cfg.model == Model::minimal;
  const bool dense = uses_dense_forward(cfg);
  Rng input_rng(derive_seed(cfg.seed, member, kInputs));
  Rng init_rng(derive_seed(cfg.seed, member, kInitial));
  Rng weight_rng(derive_seed(cfg.seed, member, kWeights));

  const double sw2 = minimal ? cfg.minimal.sigma_w2 : cfg.vanilla.sigma_w2;
  const double sv2 = minimal ? cfg.minimal.sigma_v2 : cfg.vanilla.sigma_v2;
  const double sb = std::sqrt(minimal ? cfg.minimal.sigma_b2 : cfg.vanilla.sigma_b2);
  const double mu = minimal ? cfg.minimal.mu_b : 0.0;
  const double R = cfg.R();

  MatrixXd W, V;
  VectorXd b(N);
  std::normal_distribution<double> nd;
  auto draw_layer = [&] {
    if (dense) {
      W = sample_weights(cfg.weight_kind, N, N, sw2, weight_rng);
      V = sample_weights(WeightKind::gaussian, N, N, sv2, weight_rng);
    }
    for (int i = 0; i < N; ++i) b[i] = mu + sb * nd(weight_rng);
  };
  if (cfg.tied) draw_layer();

  VectorXd ha, hb;
  initial_pair(N, h0_target, cfg.initial_cosine, init_rng, ha, hb);
  VectorXd za(N), zb(N), wa(N), wb(N), va(N), vb(N), pa(N), pb(N);

  MemberTrace tr;
  tr.q.reserve(cfg.T + 1);
  tr.c.reserve(cfg.T + 1);
  const double inv_n = 1.0 / N;
  if (minimal) {
    const double Q0 = 0.5 * (ha.squaredNorm() + hb.squaredNorm()) * inv_n;
    const double C0 = cosine(ha, hb);
    tr.Q.push_back(Q0);
    tr.C.push_back(C0);
    tr.q.push_back(cfg.minimal.q_of(Q0));
    tr.c.push_back(C0);
  } else {
    tr.q.push_back(0.5 * (ha.squaredNorm() + hb.squaredNorm()) * inv_n);
    tr.c.push_back(cosine(ha, hb));
  }

  for (int t = 1; t <= cfg.T; ++t) {
    if (!cfg.tied) draw_layer();
    sample_inputs(R, cfg.sigma_at(t), input_rng, za, zb);
    // Recurrent argument: h for the minimal cell, phi(h) for the vanilla one.
    if (minimal) {
      pa = ha;
      pb = hb;
    } else {
      pa = ha.array().tanh();
      pb = hb.array().tanh();
    }
    if (dense) {
      wa.noalias() = W * pa;
      wb.noalias() = W * pb;
      va.noalias() = V * za;
      vb.noalias() = V * zb;
    } else {
      project_pair(pa, pb, sw2, weight_rng, wa, wb);
      project_pair(za, zb, sv2, weight_rng, va, vb);
    }
    VectorXd preA = wa + va + b;
    VectorXd preB = wb + vb + b;
    if (minimal) {
      for (int i = 0; i < N; ++i) {
        const double ua = logistic(preA[i]);
        const double ub = logistic(preB[i]);
        ha[i] = ua * ha[i] + (1.0 - ua) * za[i];
        hb[i] = ub * hb[i] + (1.0 - ub) * zb[i];
      }
      preA.array() -= mu;
      preB.array() -= mu;
      tr.q.push_back(0.5 * (preA.squaredNorm() + preB.squaredNorm()) * inv_n);
      tr.c.push_back(cosine(preA, preB));
      tr.Q.push_back(0.5 * (ha.squaredNorm() + hb.squaredNorm()) * inv_n);
      tr.C.push_back(cosine(ha, hb));
    } else {
      ha = preA;
      hb = preB;
      tr.q.push_back(0.5 * (ha.squaredNorm() + hb.squaredNorm()) * inv_n);
      tr.c.push_back(cosine(ha, hb));
    }
  }
  return tr;
}

struct MemberSpectrum {
  std::vector<double> mean, variance, second_moment;
  std::vector<double> log_sv_mean, sv_min, sv_max;
};

MemberSpectrum spectrum_member(const SimConfig& cfg, int member, double h0_target,
                               const std::vector<int>& checkpoints) {
  const int N = cfg.N;
  const bool minimal = cfg.model == Model::minimal;
  Rng input_rng(derive_seed(cfg.seed, member, kInputs));
  Rng init_rng(derive_seed(cfg.seed, member, kInitial));
  Rng weight_rng(derive_seed(cfg.seed, member, kWeights));

  const double sw2 = minimal ? cfg.minimal.sigma_w2 : cfg.vanilla.sigma_w2;
  const double sv2 = minimal ? cfg.minimal.sigma_v2 : cfg.vanilla.sigma_v2;
  const double sb = std::sqrt(minimal ? cfg.minimal.sigma_b2 : cfg.vanilla.sigma_b2);
  const double mu = minimal ? cfg.minimal.mu_b : 0.0;
  const double R = cfg.R();

  MatrixXd W, V;
  VectorXd b(N);
  std::normal_distribution<double> nd;
  auto draw_layer = [&] {
    W = sample_weights(cfg.weight_kind, N, N, sw2, weight_rng);
    if (cfg.tied) V = sample_weights(WeightKind::gaussian, N, N, sv2, weight_rng);
    for (int i = 0; i < N; ++i) b[i] = mu + sb * nd(weight_rng);
  };
  if (cfg.tied) draw_layer();

  VectorXd h = gaussian_vector(N, init_rng);
  h *= std::sqrt(h0_target * N) / h.norm();
  MatrixXd M = MatrixXd::Identity(N, N);
  MatrixXd WM(N, N);
  double log_scale = 0.0;  // J = exp(log_scale) * M
  VectorXd z(N), vz(N), d(N);

  MemberSpectrum out;
  std::size_t next_cp = 0;
  for (int t = 1; t <= cfg.T; ++t) {
    if (!cfg.tied) draw_layer();
    for (int i = 0; i < N; ++i) z[i] = std::sqrt(R) * nd(input_rng);
    if (cfg.tied) {
      vz.noalias() = V * z;
    } else {
      const double s = std::sqrt(sv2 * z.squaredNorm() / N);
      for (int i = 0; i < N; ++i) vz[i] = s * nd(weight_rng);
    }
    if (minimal) {
      VectorXd v = W * h + vz + b;
      VectorXd u(N);
      for (int i = 0; i < N; ++i) {
        u[i] = logistic(v[i]);
        d[i] = logistic_prime(v[i]) * (h[i] - z[i]);
      }
      // J_t = D_u + D_{sigma'(v)(h - z)} W
      WM.noalias() = W * M;
      M = u.asDiagonal() * M;
      M.noalias() += d.asDiagonal() * WM;
      h = u.cwiseProduct(h) + (VectorXd::Ones(N) - u).cwiseProduct(z);
    } else {
      // J_t = W D_{phi'(h)}
      for (int i = 0; i < N; ++i) d[i] = tanh_prime(h[i]);
      M = d.asDiagonal() * M;
      WM.noalias() = W * M;
      M.swap(WM);
      h = W * h.array().tanh().matrix() + vz + b;
    }
    if (t % 8 == 0) {
      const double s = M.norm() / std::sqrt(static_cast<double>(N));
      if (s > 0.0 && std::isfinite(s)) {
        M /= s;
        log_scale += std::log(s);
      }
    }
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
      ++next_cp;
      MatrixXd A = MatrixXd::Zero(N, N);
      A.selfadjointView<Eigen::Lower>().rankUpdate(M);
      A.triangularView<Eigen::StrictlyUpper>() = A.transpose();
      const double scale = std::exp(2.0 * log_scale);
      const double m1 = A.trace() / N;
      const double m2 = A.squaredNorm() / N;
      out.mean.push_back(scale * m1);
      out.second_moment.push_back(scale * scale * m2);
      out.variance.push_back(scale * scale * std::fmax(0.0, m2 - m1 * m1));
      if (cfg.eigenvalues) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
        const VectorXd& lam = es.eigenvalues();
        double acc = 0.0;
        for (int i = 0; i < N; ++i) acc += 0.5 * std::log(std::fmax(lam[i], 1e-300));
        out.log_sv_mean.push_back(acc / N + log_scale);
        out.sv_min.push_back(std::sqrt(std::fmax(lam.minCoeff(), 0.0)) * std::exp(log_scale));
        out.sv_max.push_back(std::sqrt(std::fmax(lam.maxCoeff(), 0.0)) * std::exp(log_scale));
      }
    }
  }
  return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t member, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ member) ^ stream);
}

void SimConfig::validate() const {
  if (N < 2) throw DomainError("SimConfig: N must be at least 2");
  if (T < 1) throw DomainError("SimConfig: T must be at least 1");
  if (ensembles < 1) throw DomainError("SimConfig: ensembles must be at least 1");
  if (!sigma_schedule.empty()) {
    if (static_cast<int>(sigma_schedule.size()) != T)
      throw DomainError("SimConfig: sigma_schedule must have T entries");
    for (double s : sigma_schedule)
      if (!(std::fabs(s) <= 1.0)) throw DomainError("SimConfig: sigma_schedule entries must lie in [-1, 1]");
  }
  if (!(std::fabs(initial_cosine) <= 1.0)) throw DomainError("SimConfig: initial_cosine must lie in [-1, 1]");
  for (int cp : checkpoints)
    if (cp < 1 || cp > T) throw DomainError("SimConfig: checkpoints must lie in [1, T]");
  if (model == Model::minimal) {
    minimal.validate();
    if (!(minimal.R > 0.0)) throw DomainError("SimConfig: R must be positive");
  } else {
    vanilla.validate();
  }
}

double SimConfig::sigma_at(int t) const {
  if (!sigma_schedule.empty()) return sigma_schedule[static_cast<std::size_t>(t - 1)];
  return model == Model::minimal ? minimal.Sigma : vanilla.Sigma;
}

Eigen::MatrixXd haar_orthogonal(int n, Rng& rng, bool sign_correction) {
  std::normal_distribution<double> nd;
  MatrixXd A(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) A(i, j) = nd(rng);
  Eigen::HouseholderQR<MatrixXd> qr(A);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
  if (sign_correction) {
    const MatrixXd& packed = qr.matrixQR();
    for (int j = 0; j < n; ++j)
      if (packed(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

Eigen::MatrixXd sample_weights(WeightKind kind, int rows, int cols, double sigma2, Rng& rng) {
  if (rows < 1 || cols < 1) throw DomainError("sample_weights: shape must be positive");
  if (!(sigma2 >= 0.0)) throw DomainError("sample_weights: variance must be non-negative");
  if (kind == WeightKind::orthogonal) {
    if (rows != cols) throw DomainError("sample_weights: orthogonal weights need a square shape");
    return std::sqrt(sigma2) * haar_orthogonal(rows, rng);
  }
  std::normal_distribution<double> nd;
  const double s = std::sqrt(sigma2 / cols);
  MatrixXd W(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) W(i, j) = s * nd(rng);
  return W;
}

Eigen::MatrixXd sample_weights(WeightKind kind, int rows, int cols, double sigma2, std::uint64_t seed) {
  Rng rng(seed);
  return sample_weights(kind, rows, cols, sigma2, rng);
}

EnsembleTrace run_forward(const SimConfig& cfg) {
  cfg.validate();
  const SimLimits& lim = cfg.limits;
  if (cfg.N > lim.max_N || cfg.T > lim.max_T || cfg.ensembles > lim.max_ensembles)
    throw ResourceError("run_forward: N, T or ensembles above the configured budget");
  if (uses_dense_forward(cfg) && cfg.N > lim.max_dense_N)
    throw ResourceError("run_forward: N = " + std::to_string(cfg.N) + " is too large for dense weights (limit " +
                        std::to_string(lim.max_dense_N) + ")");

  EnsembleTrace out;
  out.model = cfg.model;
  out.N = cfg.N;
  out.ensembles = cfg.ensembles;
  out.tied = cfg.tied;
  out.rows.resize(static_cast<std::size_t>(cfg.T) + 1);

  // Theory overlay at the variance fixed point.
  double h0_target = 0.0;
  if (cfg.model == Model::minimal) {
    const MinimalMeanField mf(cfg.minimal);
    const VarianceFixedPoint vfp = mf.solve_variance_fixed_point();
    out.q_star = vfp.q_star;
    out.Q_star = vfp.Q_star;
    h0_target = vfp.Q_star;
    double C = cfg.initial_cosine;
    out.rows[0].c_theory = C;
    out.rows[0].C_theory = C;
    out.rows[0].q_theory = vfp.q_star;
    for (int t = 1; t <= cfg.T; ++t) {
      const MinimalState s = mf.hidden_step(C, cfg.sigma_at(t), vfp);
      C = s.C;
      out.rows[t].c_theory = s.c;
      out.rows[t].C_theory = s.C;
      out.rows[t].q_theory = vfp.q_star;
    }
  } else {
    const VanillaMeanField vm(cfg.vanilla);
    const double q_star = vm.solve_q_star();
    if (q_star == 0.0)
      throw DegenerateStateError("run_forward: vanilla q* = 0, cosine similarity undefined");
    out.q_star = q_star;
    h0_target = q_star;
    double c = cfg.initial_cosine;
    out.rows[0].c_theory = c;
    out.rows[0].q_theory = q_star;
    for (int t = 1; t <= cfg.T; ++t) {
      c = vm.c_map(c, q_star, cfg.sigma_at(t));
      out.rows[t].c_theory = c;
      out.rows[t].q_theory = q_star;
    }
  }

  std::vector<MemberTrace> members(static_cast<std::size_t>(cfg.ensembles));
  parallel_for(cfg.ensembles, cfg.threads,
               [&](int m) { members[static_cast<std::size_t>(m)] = forward_member(cfg, m, h0_target); });

  std::vector<double> buf(members.size());
  auto column = [&](auto field, int t) {
    for (std::size_t m = 0; m < members.size(); ++m) buf[m] = (members[m].*field)[static_cast<std::size_t>(t)];
    return summarize(buf);
  };
  for (int t = 0; t <= cfg.T; ++t) {
    TraceRow& row = out.rows[static_cast<std::size_t>(t)];
    row.t = t;
    const Moments q = column(&MemberTrace::q, t);
    const Moments c = column(&MemberTrace::c, t);
    row.q_mc = q.mean;
    row.q_mc_stderr = q.stderr_;
    row.c_mc = c.mean;
    row.c_mc_stderr = c.stderr_;
    if (cfg.model == Model::minimal) {
      const Moments Q = column(&MemberTrace::Q, t);
      const Moments C = column(&MemberTrace::C, t);
      row.Q_mc = Q.mean;
      row.Q_mc_stderr = Q.stderr_;
      row.C_mc = C.mean;
      row.C_mc_stderr = C.stderr_;
    }
  }
  return out;
}

SpectrumResult jacobian_spectrum(const SimConfig& cfg) {
  cfg.validate();
  const SimLimits& lim = cfg.limits;
  if (cfg.N > lim.max_spectrum_N || cfg.T > lim.max_spectrum_T || cfg.ensembles > lim.max_ensembles)
    throw ResourceError("jacobian_spectrum: N = " + std::to_string(cfg.N) + ", T = " + std::to_string(cfg.T) +
                        " exceeds the dense-product budget (N <= " + std::to_string(lim.max_spectrum_N) +
                        ", T <= " + std::to_string(lim.max_spectrum_T) + ")");

  std::vector<int> checkpoints = cfg.checkpoints.empty() ? std::vector<int>{cfg.T} : cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  SpectrumResult out;
  out.model = cfg.model;
  out.weight_kind = cfg.weight_kind;
  out.N = cfg.N;
  out.ensembles = cfg.ensembles;
  out.tied = cfg.tied;

  double h0_target = 0.0;
  std::vector<SpectrumCheckpoint> cps(checkpoints.size());
  if (cfg.model == Model::minimal) {
    const MinimalMeanField mf(cfg.minimal);
    const VarianceFixedPoint vfp = mf.solve_variance_fixed_point();
    h0_target = vfp.Q_star;
    const JacobianMoments jm = jacobian_moments(vfp, cfg.minimal);
    out.moments = jm;
    out.chi_1 = chi1_backward(jm);
    const WeightEnsemble ens = WeightEnsemble::of(cfg.weight_kind);
    for (std::size_t k = 0; k < cps.size(); ++k) {
      cps[k].theory_mean = std::pow(out.chi_1, checkpoints[k]);
      cps[k].theory_variance = spectral_variance(jm, ens.s1, checkpoints[k]);
    }
  } else {
    const VanillaMeanField vm(cfg.vanilla);
    const double q_star = vm.solve_q_star();
    h0_target = q_star;
    out.chi_1 = vm.chi(1.0, q_star);
    for (std::size_t k = 0; k < cps.size(); ++k) cps[k].theory_mean = std::pow(out.chi_1, checkpoints[k]);
  }

  std::vector<MemberSpectrum> members(static_cast<std::size_t>(cfg.ensembles));
  parallel_for(cfg.ensembles, cfg.threads, [&](int m) {
    members[static_cast<std::size_t>(m)] = spectrum_member(cfg, m, h0_target, checkpoints);
  });

  std::vector<double> buf(members.size());
  auto column = [&](auto field, std::size_t k) {
    for (std::size_t m = 0; m < members.size(); ++m) buf[m] = (members[m].*field)[k];
    return summarize(buf);
  };
  for (std::size_t k = 0; k < cps.size(); ++k) {
    SpectrumCheckpoint& cp = cps[k];
    cp.T = checkpoints[k];
    const Moments mean = column(&MemberSpectrum::mean, k);
    const Moments var = column(&MemberSpectrum::variance, k);
    const Moments m2 = column(&MemberSpectrum::second_moment, k);
    cp.mean = mean.mean;
    cp.mean_stderr = mean.stderr_;
    cp.variance = var.mean;
    cp.variance_stderr = var.stderr_;
    cp.second_moment = m2.mean;
    cp.second_moment_stderr = m2.stderr_;
    if (cfg.eigenvalues) {
      cp.log_sv_mean = column(&MemberSpectrum::log_sv_mean, k).mean;
      double lo = members[0].sv_min[k];
      double hi = members[0].sv_max[k];
      for (const auto& m : members) {
        lo = std::min(lo, m.sv_min[k]);
        hi = std::max(hi, m.sv_max[k]);
      }
      cp.sv_min = lo;
      cp.sv_max = hi;
    }
  }
  out.checkpoints = std::move(cps);
  return out;
}

}  // namespace rnnmf
