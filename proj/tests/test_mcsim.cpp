#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rnnmf/mcsim.hpp"
#include "test_support.hpp"

using namespace rnnmf;
using testing::ref_point;

namespace {

SimConfig minimal_config(const MinimalParams& p, int N, int T, int ensembles) {
  SimConfig c;
  c.model = Model::minimal;
  c.minimal = p;
  c.N = N;
  c.T = T;
  c.ensembles = ensembles;
  c.seed = 42;
  return c;
}

SimConfig critinit_config(int N, int T, int ensembles, WeightKind kind = WeightKind::gaussian) {
  const CriticalInit ci = critical_minimal(4.0, 4.0, 0.46);
  SimConfig c = minimal_config(ci.minimal_params(), N, T, ensembles);
  c.weight_kind = kind;
  return c;
}

bool same_trace(const EnsembleTrace& a, const EnsembleTrace& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const TraceRow &x = a.rows[i], &y = b.rows[i];
    if (x.q_mc != y.q_mc || x.c_mc != y.c_mc || x.Q_mc != y.Q_mc || x.C_mc != y.C_mc ||
        x.c_mc_stderr != y.c_mc_stderr || x.c_theory != y.c_theory)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("seed derivation") {
  // Reference output of splitmix64 for state 0.
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
  CHECK(derive_seed(7, 3, 2) == derive_seed(7, 3, 2));
}

TEST_CASE("Gaussian weights have the prescribed element variance") {
  const int N = 1024;
  const Eigen::MatrixXd W = sample_weights(WeightKind::gaussian, N, N, 1.0, std::uint64_t{9});
  const double mean = W.mean();
  const double var = (W.array() - mean).square().mean();
  CHECK(var > 0.8 / N);
  CHECK(var < 1.2 / N);
  CHECK(var == doctest::Approx(1.0 / N).epsilon(0.01));
  CHECK(std::fabs(mean) < 5.0 / N);
  const Eigen::MatrixXd V = sample_weights(WeightKind::gaussian, 64, 256, 2.0, std::uint64_t{9});
  CHECK(V.rows() == 64);
  CHECK((V.array().square().mean()) == doctest::Approx(2.0 / 256).epsilon(0.05));
}

TEST_CASE("orthogonal weights") {
  for (double sigma2 : {1.0, 2.25}) {
    const Eigen::MatrixXd W = sample_weights(WeightKind::orthogonal, 256, 256, sigma2, std::uint64_t{4});
    const Eigen::MatrixXd G = W.transpose() * W - sigma2 * Eigen::MatrixXd::Identity(256, 256);
    CHECK(G.cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK_THROWS_AS(sample_weights(WeightKind::orthogonal, 4, 5, 1.0, std::uint64_t{1}), DomainError);
  CHECK_THROWS_AS(sample_weights(WeightKind::gaussian, 0, 5, 1.0, std::uint64_t{1}), DomainError);
  CHECK_THROWS_AS(sample_weights(WeightKind::gaussian, 4, 4, -1.0, std::uint64_t{1}), DomainError);
}

TEST_CASE("sign correction removes the QR bias of the first column") {
  const int n = 64, ensembles = 400;
  double with = 0.0, without = 0.0;
  for (int k = 0; k < ensembles; ++k) {
    Rng a(1000 + k), b(1000 + k);
    with += haar_orthogonal(n, a, true)(0, 0);
    without += haar_orthogonal(n, b, false)(0, 0);
  }
  with /= ensembles;
  without /= ensembles;
  const double bound = 3.0 / std::sqrt(double(ensembles) * n);
  CHECK(std::fabs(with) < bound);
  CHECK(std::fabs(without) > bound);
}

TEST_CASE("parallel loop") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { hits[i] += 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 1000);
  CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](int i) {
                                 if (i == 37) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  int count = 0;
  parallel_for(0, 4, [&](int) { ++count; });
  CHECK(count == 0);
}

TEST_CASE("forward traces are reproducible and independent of thread count") {
  SimConfig c = minimal_config(ref_point(2.0, 0.0), 256, 20, 8);
  c.threads = 1;
  const EnsembleTrace a = run_forward(c);
  c.threads = 4;
  const EnsembleTrace b = run_forward(c);
  CHECK(same_trace(a, b));
  CHECK(same_trace(a, run_forward(c)));
  c.seed = 43;
  CHECK_FALSE(same_trace(a, run_forward(c)));
  c.seed = 42;
  c.tied = true;
  CHECK_FALSE(same_trace(a, run_forward(c)));
}

TEST_CASE("initial row and trace shape") {
  SimConfig c = minimal_config(ref_point(0.0, 0.0), 128, 1, 3);
  const EnsembleTrace tr = run_forward(c);
  REQUIRE(tr.rows.size() == 2);
  CHECK(tr.rows[0].t == 0);
  CHECK(tr.rows[1].t == 1);
  CHECK(tr.rows[0].C_mc == doctest::Approx(1.0));
  CHECK(tr.rows[0].Q_mc == doctest::Approx(tr.Q_star).epsilon(1e-12));
  for (const TraceRow& r : tr.rows) {
    CHECK(std::fabs(r.c_mc) <= 1.0 + 3.0 / std::sqrt(128.0));
    CHECK(std::fabs(r.C_mc) <= 1.0 + 3.0 / std::sqrt(128.0));
  }
}

TEST_CASE("untied minimal traces follow the theory") {
  SimConfig c = minimal_config(ref_point(2.0, 0.0), 1024, 30, 20);
  c.sigma_schedule.assign(30, 0.0);
  for (int t = 10; t < 30; ++t) c.sigma_schedule[t] = 1.0;
  c.threads = 0;
  const EnsembleTrace tr = run_forward(c);
  double worst = 0.0;
  for (const TraceRow& r : tr.rows) worst = std::fmax(worst, std::fabs(r.c_mc - r.c_theory));
  CHECK(worst < 0.03);
  for (std::size_t t = 1; t < tr.rows.size(); ++t) {
    CHECK(tr.rows[t].q_mc == doctest::Approx(tr.q_star).epsilon(0.05));
    CHECK(tr.rows[t].Q_mc == doctest::Approx(tr.Q_star).epsilon(0.05));
  }
}

TEST_CASE("dense and projected untied sampling agree statistically") {
  SimConfig c = minimal_config(ref_point(1.0, 0.3), 512, 15, 16);
  c.threads = 0;
  const EnsembleTrace proj = run_forward(c);
  c.dense = true;
  const EnsembleTrace dense = run_forward(c);
  for (std::size_t t = 1; t < proj.rows.size(); ++t) {
    const double se = std::hypot(proj.rows[t].c_mc_stderr, dense.rows[t].c_mc_stderr);
    CHECK(std::fabs(proj.rows[t].c_mc - dense.rows[t].c_mc) < 5.0 * se + 1e-3);
  }
}

TEST_CASE("untied traces settle at the theoretical fixed point") {
  for (double mu : {-2.0, 0.0, 2.0}) {
    const MinimalParams p = ref_point(mu, 0.0);
    const MinimalFixedPoint fp = MinimalMeanField(p).solve_fixed_point();
    REQUIRE(std::isfinite(fp.tau));
    // From c0 = 1 the map is nearly neutral (chi_1 ~ 1), so the 5 tau clock starts once
    // the theory trace is within 0.05 of c*.
    SimConfig probe = minimal_config(p, 64, 400, 1);
    const EnsembleTrace theory = run_forward(probe);
    int t0 = 0;
    while (std::fabs(theory.rows[t0].c_theory - fp.c_star) > 0.05) ++t0;
    const int T = t0 + static_cast<int>(std::ceil(5.0 * fp.tau));
    CAPTURE(mu);
    CAPTURE(T);
    REQUIRE(T <= 400);
    SimConfig c = minimal_config(p, 1024, T, 40);
    c.threads = 0;
    const EnsembleTrace tr = run_forward(c);
    const TraceRow& last = tr.rows.back();
    CHECK(std::fabs(last.c_mc - fp.c_star) <= 3.0 * last.c_mc_stderr);
  }
}

TEST_CASE("tied weights in the chaotic regime still reach a fixed point") {
  SimConfig c = minimal_config(ref_point(0.0, 0.0), 512, 60, 16);
  c.tied = true;
  c.threads = 0;
  const EnsembleTrace tied = run_forward(c);
  c.tied = false;
  const EnsembleTrace untied = run_forward(c);
  for (const EnsembleTrace* tr : {&tied, &untied}) {
    auto window = [&](int a, int b) {
      double acc = 0.0;
      for (int t = a; t < b; ++t) acc += tr->rows[t].c_mc;
      return acc / (b - a);
    };
    CHECK(std::fabs(window(40, 50) - window(50, 60)) < 0.02);
    CHECK(std::fabs(window(50, 60)) < 0.1);
  }
}

TEST_CASE("orthogonal and tied runs use square dense weights") {
  SimConfig c = minimal_config(ref_point(1.0, 0.0), 128, 5, 2);
  c.weight_kind = WeightKind::orthogonal;
  const EnsembleTrace tr = run_forward(c);
  CHECK(tr.rows.size() == 6);
  c.limits.max_dense_N = 64;
  CHECK_THROWS_AS(run_forward(c), ResourceError);
}

TEST_CASE("vanilla ordered phase with identical inputs aligns the pair") {
  SimConfig c;
  c.model = Model::vanilla;
  c.vanilla = {0.81, 1e-4, 0.0, 1.0, 1.0};
  c.N = 512;
  c.T = 60;
  c.ensembles = 8;
  c.initial_cosine = 0.2;
  c.seed = 3;
  const EnsembleTrace tr = run_forward(c);
  CHECK(tr.rows[0].c_mc == doctest::Approx(0.2).epsilon(0.05));
  CHECK(tr.rows.back().c_mc > 0.99);
  CHECK(tr.rows.back().c_theory > 0.99);

  c.vanilla = {0.81, 0.0, 0.0, 1.0, 1.0};
  CHECK_THROWS_AS(run_forward(c), DegenerateStateError);
}

TEST_CASE("configuration and budget errors") {
  SimConfig c = minimal_config(ref_point(0.0), 64, 4, 2);
  SUBCASE("validation") {
    c.N = 1;
    CHECK_THROWS_AS(run_forward(c), DomainError);
  }
  SUBCASE("schedule length") {
    c.sigma_schedule = {0.0, 1.0};
    CHECK_THROWS_AS(run_forward(c), DomainError);
  }
  SUBCASE("schedule range") {
    c.sigma_schedule = {0.0, 1.0, 2.0, 0.0};
    CHECK_THROWS_AS(run_forward(c), DomainError);
  }
  SUBCASE("checkpoint range") {
    c.checkpoints = {5};
    CHECK_THROWS_AS(jacobian_spectrum(c), DomainError);
  }
  SUBCASE("forward budget") {
    c.limits.max_T = 3;
    CHECK_THROWS_AS(run_forward(c), ResourceError);
  }
  SUBCASE("spectrum budget") {
    c.N = 4096;
    CHECK_THROWS_AS(jacobian_spectrum(c), ResourceError);
    c.N = 64;
    c.T = 200;
    CHECK_THROWS_AS(jacobian_spectrum(c), ResourceError);
  }
}

TEST_CASE("saturated gates give an isometric Jacobian") {
  SimConfig c = minimal_config(ref_point(30.0), 256, 16, 2);
  const SpectrumResult s = jacobian_spectrum(c);
  REQUIRE(s.checkpoints.size() == 1);
  const SpectrumCheckpoint& cp = s.checkpoints[0];
  REQUIRE(cp.sv_min.has_value());
  CHECK(*cp.sv_min >= 0.99);
  CHECK(*cp.sv_max <= 1.01);
  CHECK(cp.mean == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(cp.variance < 1e-2);
  CHECK(*cp.theory_variance - 1.0 < 1e-2);
}

TEST_CASE("spectrum statistics are reproducible and thread independent") {
  SimConfig c = critinit_config(96, 8, 4);
  c.checkpoints = {4, 8};
  c.threads = 1;
  const SpectrumResult a = jacobian_spectrum(c);
  c.threads = 3;
  const SpectrumResult b = jacobian_spectrum(c);
  REQUIRE(a.checkpoints.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.checkpoints[i].mean == b.checkpoints[i].mean);
    CHECK(a.checkpoints[i].variance == b.checkpoints[i].variance);
    CHECK(a.checkpoints[i].second_moment == b.checkpoints[i].second_moment);
    CHECK(a.checkpoints[i].variance ==
          doctest::Approx(a.checkpoints[i].second_moment - a.checkpoints[i].mean * a.checkpoints[i].mean)
              .epsilon(0.05));
  }
  c.eigenvalues = false;
  const SpectrumResult d = jacobian_spectrum(c);
  CHECK_FALSE(d.checkpoints[0].sv_min.has_value());
  CHECK(d.checkpoints[1].mean == a.checkpoints[1].mean);
}

TEST_CASE("critical initialization keeps the mean squared singular value at one") {
  SimConfig c = critinit_config(256, 16, 6);
  c.threads = 0;
  const SpectrumResult s = jacobian_spectrum(c);
  CHECK(s.chi_1 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.checkpoints[0].theory_mean == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.checkpoints[0].mean == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("single-step spectrum compared with the closed form") {
  // The closed form tends to the second moment of the eigenvalues, not their variance.
  SimConfig c = critinit_config(512, 1, 10);
  c.threads = 0;
  const SpectrumResult s = jacobian_spectrum(c);
  const SpectrumCheckpoint& cp = s.checkpoints[0];
  REQUIRE(cp.theory_variance.has_value());
  CHECK(cp.second_moment == doctest::Approx(*cp.theory_variance).epsilon(0.1));
  CHECK(cp.variance < 0.5 * *cp.theory_variance);
}

TEST_CASE("log of the spectral mean grows at log chi_1 per step") {
  const MinimalParams p{20.0, 1.0, 0.0, 0.0, 0.5, 1.0};
  SimConfig c = minimal_config(p, 256, 32, 6);
  c.checkpoints = {8, 16, 32};
  c.threads = 0;
  const SpectrumResult s = jacobian_spectrum(c);
  REQUIRE(std::fabs(std::log(s.chi_1)) > 0.02);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const SpectrumCheckpoint& cp : s.checkpoints) {
    const double x = cp.T, y = std::log(cp.mean);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
  CAPTURE(s.chi_1);
  CHECK(slope == doctest::Approx(std::log(s.chi_1)).epsilon(0.1));
}

TEST_CASE("vanilla spectrum mean follows chi_1^T") {
  SimConfig c;
  c.model = Model::vanilla;
  c.vanilla = {1.44, 0.01, 0.0, 1.0, 1.0};
  c.N = 256;
  c.T = 16;
  c.ensembles = 6;
  c.threads = 0;
  const SpectrumResult s = jacobian_spectrum(c);
  CHECK_FALSE(s.moments.has_value());
  CHECK_FALSE(s.checkpoints[0].theory_variance.has_value());
  CHECK(s.checkpoints[0].mean == doctest::Approx(std::pow(s.chi_1, 16)).epsilon(0.15));
}
