#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rnnmf/critinit.hpp"
#include "rnnmf/isometry.hpp"
#include "rnnmf/minimal.hpp"
#include "rnnmf/vanilla.hpp"

namespace rnnmf {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; member and stream seeds are derived with it so that
/// results do not depend on thread count or scheduling.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t member, std::uint64_t stream);

struct SimLimits {
  int max_N = 1 << 20;          ///< forward runs with the projection sampler
  int max_dense_N = 4096;       ///< forward runs that materialize N x N matrices
  int max_T = 100000;
  int max_ensembles = 100000;
  int max_spectrum_N = 2048;
  int max_spectrum_T = 128;
};

struct SimConfig {
  Model model = Model::minimal;
  int N = 2048;
  int T = 50;
  int ensembles = 100;
  bool tied = false;
  WeightKind weight_kind = WeightKind::gaussian;
  /// Untied Gaussian forward runs sample W h and V z per step from their exact
  /// conditional law; set to draw full matrices instead.
  bool dense = false;
  VanillaParams vanilla;
  MinimalParams minimal;
  /// Sigma^t for t = 1..T. Empty means the params' Sigma at every step.
  std::vector<double> sigma_schedule;
  /// Cosine between the two initial states (1 = shared h0).
  double initial_cosine = 1.0;
  /// Time steps at which jacobian_spectrum records statistics; empty means {T}.
  std::vector<int> checkpoints;
  /// Compute the full JJ^T eigenvalues (singular-value summary) at checkpoints.
  bool eigenvalues = true;
  std::uint64_t seed = 0;
  int threads = 1;  ///< 0 = hardware concurrency
  SimLimits limits;

  void validate() const;
  double sigma_at(int t) const;  ///< t in 1..T
  double R() const { return model == Model::minimal ? minimal.R : vanilla.R; }
};

struct TraceRow {
  int t = 0;
  double q_mc = 0.0, q_mc_stderr = 0.0;
  double c_mc = 0.0, c_mc_stderr = 0.0;
  double Q_mc = 0.0, Q_mc_stderr = 0.0;  ///< minimal only
  double C_mc = 0.0, C_mc_stderr = 0.0;  ///< minimal only
  double q_theory = 0.0;
  double c_theory = 0.0;
  double C_theory = 0.0;  ///< minimal only
};

/// Row t = 0 is the initial condition; rows 1..T follow one update each.
struct EnsembleTrace {
  Model model = Model::minimal;
  int N = 0;
  int ensembles = 0;
  bool tied = false;
  double q_star = 0.0;
  double Q_star = 0.0;  ///< minimal only
  std::vector<TraceRow> rows;
};

struct SpectrumCheckpoint {
  int T = 0;
  double mean = 0.0, mean_stderr = 0.0;            ///< (1/N) tr(J J^T), averaged over nets
  double variance = 0.0, variance_stderr = 0.0;    ///< per-net eigenvalue variance, averaged
  double second_moment = 0.0, second_moment_stderr = 0.0;
  /// Singular-value summary over all nets (present when eigenvalues were computed).
  std::optional<double> log_sv_mean, sv_min, sv_max;
  double theory_mean = 0.0;                        ///< chi_1^T
  std::optional<double> theory_variance;           ///< minimal only
};

struct SpectrumResult {
  Model model = Model::minimal;
  WeightKind weight_kind = WeightKind::gaussian;
  int N = 0;
  int ensembles = 0;
  bool tied = false;
  double chi_1 = 0.0;
  std::optional<JacobianMoments> moments;  ///< minimal only
  std::vector<SpectrumCheckpoint> checkpoints;
};

/// Haar-distributed orthogonal n x n matrix from the QR of a Gaussian matrix. Without the
/// sign correction the result is orthogonal but not Haar.
Eigen::MatrixXd haar_orthogonal(int n, Rng& rng, bool sign_correction = true);

/// Gaussian entries N(0, sigma2/cols), or sqrt(sigma2) times a Haar orthogonal matrix.
Eigen::MatrixXd sample_weights(WeightKind kind, int rows, int cols, double sigma2, Rng& rng);
Eigen::MatrixXd sample_weights(WeightKind kind, int rows, int cols, double sigma2, std::uint64_t seed);

EnsembleTrace run_forward(const SimConfig& cfg);
SpectrumResult jacobian_spectrum(const SimConfig& cfg);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware concurrency).
/// Exceptions from any call are rethrown after all workers stop.
template <class F>
void parallel_for(int n, int threads, F&& body);

}  // namespace rnnmf

#include "rnnmf/detail/parallel.hpp"
