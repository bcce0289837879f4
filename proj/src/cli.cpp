#include "rnnmf/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "rnnmf/critinit.hpp"
#include "rnnmf/isometry.hpp"
#include "rnnmf/mcsim.hpp"
#include "rnnmf/minimal.hpp"
#include "rnnmf/vanilla.hpp"

namespace rnnmf::cli {
namespace {

using json = nlohmann::ordered_json;

struct UsageError : Error {
  using Error::Error;
};

json num(double x) {
  if (std::isnan(x)) throw Error("NaN in output");
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("cannot parse " + what + " '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("cannot parse " + what + " '" + s + "'");
  }
}

/// Hyperparameters as given on the command line (standard deviations, not variances).
struct Flags {
  std::string model;
  double sigma_w = 1.0;
  double sigma_v = 0.0;
  double sigma_b = 0.0;
  double mu_b = 0.0;
  double R = 1.0;
  double Sigma = 1.0;
  std::string out;
  int threads = -1;
  int max_iterations = 10000;

  Model kind() const { return model == "minimal" ? Model::minimal : Model::vanilla; }
  MinimalParams minimal() const {
    return {sigma_w * sigma_w, sigma_v * sigma_v, sigma_b * sigma_b, mu_b, R, Sigma};
  }
  VanillaParams vanilla() const { return {sigma_w * sigma_w, sigma_v * sigma_v, sigma_b * sigma_b, R, Sigma}; }
  SolverOptions solver() const {
    SolverOptions o;
    o.max_iterations = max_iterations;
    return o;
  }
  int resolved_threads() const {
    if (threads >= 0) return threads;
    if (const char* env = std::getenv("RNNMF_THREADS")) return std::max(0, std::atoi(env));
    return 0;
  }
};

void add_model(CLI::App* sub, Flags& f) {
  sub->add_option("model", f.model, "minimal or vanilla")->required()->check(CLI::IsMember({"minimal", "vanilla"}));
}

void add_params(CLI::App* sub, Flags& f) {
  sub->add_option("--sigma-w", f.sigma_w, "recurrent weight scale sigma_w")->capture_default_str();
  sub->add_option("--sigma-v", f.sigma_v, "input weight scale sigma_v")->capture_default_str();
  sub->add_option("--sigma-b", f.sigma_b, "bias scale sigma_b")->capture_default_str();
  sub->add_option("--mu-b", f.mu_b, "gate bias mean (minimal)")->capture_default_str();
  sub->add_option("--R", f.R, "input norm")->capture_default_str();
  sub->add_option("--Sigma", f.Sigma, "input cosine similarity")->capture_default_str();
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--out", f.out, "write output to FILE instead of stdout");
  sub->add_option("--threads", f.threads, "worker threads (0 = all cores)");
}

json params_json(const Flags& f) {
  json p;
  if (f.kind() == Model::minimal) {
    const MinimalParams m = f.minimal();
    p = {{"sigma_w2", num(m.sigma_w2)}, {"sigma_v2", num(m.sigma_v2)}, {"sigma_b2", num(m.sigma_b2)},
         {"mu_b", num(m.mu_b)},         {"R", num(m.R)},               {"Sigma", num(m.Sigma)}};
  } else {
    const VanillaParams v = f.vanilla();
    p = {{"sigma_w2", num(v.sigma_w2)}, {"sigma_v2", num(v.sigma_v2)}, {"sigma_b2", num(v.sigma_b2)},
         {"R", num(v.R)},               {"Sigma", num(v.Sigma)}};
  }
  return p;
}

json theory_json(const Flags& f) {
  json j;
  j["model"] = f.model;
  j["params"] = params_json(f);
  if (f.kind() == Model::minimal) {
    const MinimalFixedPoint fp = MinimalMeanField(f.minimal(), f.solver()).solve_fixed_point();
    j["q_star"] = num(fp.q_star);
    j["Q_star"] = num(fp.Q_star);
    j["c_star"] = num(fp.c_star);
    j["C_star"] = num(fp.C_star);
    j["chi_cstar"] = num(fp.chi_cstar);
    j["chi_1"] = num(fp.chi_1);
    j["tau"] = num(fp.tau);
    j["xi_Q"] = num(fp.xi_Q);
    j["xi_Q_closed_form"] = num(fp.xi_Q_closed_form);
    j["J_plus"] = num(fp.J_plus);
    j["J_minus"] = num(fp.J_minus);
    j["converged"] = fp.converged;
    j["multiple_fixed_points"] = fp.multiple_fixed_points;
    j["iterations"] = fp.iterations;
  } else {
    const VanillaFixedPoint fp = VanillaMeanField(f.vanilla(), f.solver()).solve_fixed_point();
    j["q_star"] = num(fp.q_star);
    j["c_star"] = num(fp.c_star);
    j["chi_cstar"] = num(fp.chi_cstar);
    j["chi_1"] = num(fp.chi_1);
    j["tau"] = num(fp.tau);
    j["converged"] = fp.converged;
    j["multiple_fixed_points"] = fp.multiple_fixed_points;
    j["degenerate"] = fp.degenerate;
    j["iterations"] = fp.iterations;
  }
  return j;
}

const char* kPhaseHeader =
    "model,sigma_w2,sigma_v2,sigma_b2,mu_b,R,Sigma,q_star,Q_star,c_star,chi_cstar,chi_1,tau,xi_Q,status";

void apply_axis(Flags& f, const std::string& name, double v) {
  if (name == "sigma_w") f.sigma_w = v;
  else if (name == "sigma_v") f.sigma_v = v;
  else if (name == "sigma_b") f.sigma_b = v;
  else if (name == "mu_b") f.mu_b = v;
  else if (name == "R") f.R = v;
  else if (name == "Sigma") f.Sigma = v;
  else throw UsageError("unknown sweep axis '" + name + "'");
}

std::string phase_row(const Flags& f) {
  const bool minimal = f.kind() == Model::minimal;
  std::string status = "ok";
  std::vector<std::string> cols(15);
  cols[0] = f.model;
  try {
    if (minimal) {
      const MinimalParams p = f.minimal();
      cols[1] = csv_number(p.sigma_w2);
      cols[2] = csv_number(p.sigma_v2);
      cols[3] = csv_number(p.sigma_b2);
      cols[4] = csv_number(p.mu_b);
      cols[5] = csv_number(p.R);
      cols[6] = csv_number(p.Sigma);
      const MinimalFixedPoint fp = MinimalMeanField(p, f.solver()).solve_fixed_point();
      cols[7] = csv_number(fp.q_star);
      cols[8] = csv_number(fp.Q_star);
      cols[9] = csv_number(fp.c_star);
      cols[10] = csv_number(fp.chi_cstar);
      cols[11] = csv_number(fp.chi_1);
      cols[12] = csv_number(fp.tau);
      cols[13] = csv_number(fp.xi_Q);
    } else {
      const VanillaParams p = f.vanilla();
      cols[1] = csv_number(p.sigma_w2);
      cols[2] = csv_number(p.sigma_v2);
      cols[3] = csv_number(p.sigma_b2);
      cols[5] = csv_number(p.R);
      cols[6] = csv_number(p.Sigma);
      const VanillaFixedPoint fp = VanillaMeanField(p, f.solver()).solve_fixed_point();
      cols[7] = csv_number(fp.q_star);
      cols[9] = csv_number(fp.c_star);
      cols[10] = csv_number(fp.chi_cstar);
      cols[11] = csv_number(fp.chi_1);
      cols[12] = csv_number(fp.tau);
      if (fp.degenerate) status = "degenerate";
    }
  } catch (const ConvergenceError&) {
    status = "no_convergence";
  } catch (const DegenerateStateError&) {
    status = "degenerate";
  } catch (const DomainError&) {
    status = "domain_error";
  }
  if (status != "ok" && status != "degenerate")
    for (std::size_t k = 7; k < 14; ++k) cols[k].clear();
  cols[14] = status;
  std::string line;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (k) line += ',';
    line += cols[k];
  }
  return line;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  for (const std::string& part : split(s, ',')) v.push_back(to_double(part, what));
  return v;
}

WeightKind weight_kind(const std::string& s) {
  return s == "orthogonal" ? WeightKind::orthogonal : WeightKind::gaussian;
}

/// Writes to --out when given, else to out.
void emit(const Flags& f, std::ostream& out, const std::string& text) {
  if (f.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(f.out);
  if (!file) throw UsageError("cannot open output file '" + f.out + "'");
  file << text;
}

}  // namespace

std::string csv_number(double x) {
  if (std::isnan(x)) throw Error("NaN in output");
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", x);
}

SweepAxis parse_sweep(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  if (parts.size() != 4) throw UsageError("sweep must be axis:start:stop:step or axis:start:stop:nCOUNT");
  SweepAxis axis;
  axis.name = parts[0];
  const double start = to_double(parts[1], "sweep start");
  const double stop = to_double(parts[2], "sweep stop");
  if (!(start <= stop)) throw UsageError("sweep start must not exceed stop");
  if (!parts[3].empty() && parts[3][0] == 'n') {
    const int count = to_int(parts[3].substr(1), "sweep count");
    if (count < 1) throw UsageError("sweep count must be positive");
    for (int i = 0; i < count; ++i)
      axis.values.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
  } else {
    const double step = to_double(parts[3], "sweep step");
    if (!(step > 0.0)) throw UsageError("sweep step must be positive");
    const double span = (stop - start) / step;
    if (span > 1e7) throw ResourceError("sweep has too many points");
    const long n = static_cast<long>(std::floor(span + 1e-9)) + 1;
    for (long i = 0; i < n; ++i) axis.values.push_back(start + step * static_cast<double>(i));
  }
  return axis;
}

std::vector<double> parse_sigma_schedule(const std::string& spec, int T) {
  std::vector<double> s;
  const std::vector<std::string> parts = split(spec, ':');
  if (parts[0] == "const" && parts.size() == 2) {
    s.assign(static_cast<std::size_t>(T), to_double(parts[1], "schedule value"));
  } else if (parts[0] == "step" && (parts.size() == 2 || parts.size() == 4)) {
    const int t0 = to_int(parts[1], "schedule step time");
    const double a = parts.size() == 4 ? to_double(parts[2], "schedule value") : 0.0;
    const double b = parts.size() == 4 ? to_double(parts[3], "schedule value") : 1.0;
    for (int t = 1; t <= T; ++t) s.push_back(t < t0 ? a : b);
  } else {
    s = parse_list(spec, "schedule value");
    if (static_cast<int>(s.size()) != T)
      throw UsageError(fmt::format("sigma schedule has {} entries, expected T = {}", s.size(), T));
  }
  for (double x : s)
    if (!(std::fabs(x) <= 1.0)) throw UsageError("sigma schedule entries must lie in [-1, 1]");
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field signal propagation for vanilla and minimal RNNs"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* theory = app.add_subcommand("theory", "fixed-point report (JSON)");
  add_model(theory, f);
  add_params(theory, f);
  add_common(theory, f);
  theory->add_option("--max-iterations", f.max_iterations, "limit for the cosine fixed-point iteration")
      ->capture_default_str();

  std::vector<std::string> sweeps;
  long max_points = 100000;
  CLI::App* phase = app.add_subcommand("phase-diagram", "fixed points over a parameter grid (CSV)");
  add_model(phase, f);
  add_params(phase, f);
  add_common(phase, f);
  phase->add_option("--sweep", sweeps, "axis:start:stop:step or axis:start:stop:nCOUNT; axes sigma_w, sigma_v, "
                                       "sigma_b, mu_b, R, Sigma")
      ->required()
      ->expected(1, 2);
  phase->add_option("--max-points", max_points, "grid size budget")->capture_default_str();
  phase->add_option("--max-iterations", f.max_iterations, "limit for the cosine fixed-point iteration")
      ->capture_default_str();

  std::optional<double> q_star;
  CLI::App* crit = app.add_subcommand("critinit", "critical initialization (JSON)");
  add_model(crit, f);
  add_params(crit, f);
  add_common(crit, f);
  crit->add_option("--q-star", q_star, "target pre-activation variance (minimal, required)");

  SimConfig sim;
  std::string weights = "gaussian";
  std::string schedule;
  std::string checkpoints;
  bool no_eigenvalues = false;
  auto add_sim = [&](CLI::App* sub) {
    add_model(sub, f);
    add_params(sub, f);
    add_common(sub, f);
    sub->add_option("--N", sim.N, "hidden width")->capture_default_str();
    sub->add_option("--T", sim.T, "time steps")->capture_default_str();
    sub->add_option("--ensembles", sim.ensembles, "number of networks")->capture_default_str();
    sub->add_flag("--tied", sim.tied, "share one weight draw across time");
    sub->add_option("--weights", weights, "gaussian or orthogonal")
        ->check(CLI::IsMember({"gaussian", "orthogonal"}))
        ->capture_default_str();
    sub->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
    sub->add_option("--sigma-schedule", schedule, "comma list, const:x, step:t0 or step:t0:a:b");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "theory vs Monte Carlo cosine traces (CSV)");
  add_sim(simulate);
  simulate->add_option("--initial-cosine", sim.initial_cosine, "cosine between the two initial states")
      ->capture_default_str();
  simulate->add_flag("--dense", sim.dense, "draw full untied matrices instead of projections");
  sim.N = 2048;
  sim.T = 50;
  sim.ensembles = 100;

  CLI::App* spectrum = app.add_subcommand("spectrum", "end-to-end Jacobian spectrum vs theory (JSON)");
  add_sim(spectrum);
  spectrum->add_option("--checkpoints", checkpoints, "comma list of T values to report (default T)");
  spectrum->add_flag("--no-eigenvalues", no_eigenvalues, "skip the singular-value summary");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("rnnmf");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (theory->parsed()) {
      emit(f, out, theory_json(f).dump(2) + "\n");
    } else if (phase->parsed()) {
      std::vector<SweepAxis> axes;
      for (const std::string& s : sweeps) axes.push_back(parse_sweep(s));
      if (axes.size() == 2 && axes[0].name == axes[1].name) throw UsageError("sweep axes must differ");
      long total = 1;
      for (const SweepAxis& a : axes) total *= static_cast<long>(a.values.size());
      if (total > max_points)
        throw ResourceError(fmt::format("sweep has {} points, budget is {}", total, max_points));
      if (f.kind() == Model::vanilla)
        for (const SweepAxis& a : axes)
          if (a.name == "mu_b") throw UsageError("mu_b is not a vanilla parameter");
      const std::size_t inner = axes.size() == 2 ? axes[1].values.size() : 1;
      std::vector<std::string> rows(static_cast<std::size_t>(total));
      for (const SweepAxis& a : axes) apply_axis(f, a.name, a.values.front());  // validates axis names
      parallel_for(static_cast<int>(total), f.resolved_threads(), [&](int i) {
        Flags g = f;
        const std::size_t k = static_cast<std::size_t>(i);
        apply_axis(g, axes[0].name, axes[0].values[k / inner]);
        if (axes.size() == 2) apply_axis(g, axes[1].name, axes[1].values[k % inner]);
        rows[k] = phase_row(g);
      });
      std::string text = std::string(kPhaseHeader) + "\n";
      for (const std::string& r : rows) text += r + "\n";
      emit(f, out, text);
    } else if (crit->parsed()) {
      json j;
      if (f.kind() == Model::minimal) {
        if (!q_star) throw UsageError("critinit minimal requires --q-star");
        const CriticalInit ci = critical_minimal(*q_star, f.mu_b, f.R);
        const double consistency =
            std::fabs(ci.sigma_w2 * *ci.Q_star + ci.sigma_v2 * ci.R + ci.sigma_b2 - ci.q_star);
        j = {{"model", "minimal"},
             {"sigma_w2", num(ci.sigma_w2)},
             {"sigma_v2", num(ci.sigma_v2)},
             {"sigma_b2", num(ci.sigma_b2)},
             {"sigma_w", num(std::sqrt(ci.sigma_w2))},
             {"sigma_v", num(std::sqrt(ci.sigma_v2))},
             {"sigma_b", num(std::sqrt(ci.sigma_b2))},
             {"q_star", num(ci.q_star)},
             {"Q_star", num(*ci.Q_star)},
             {"mu_b", num(ci.mu_b)},
             {"R", num(ci.R)},
             {"verification",
              {{"chi_1", num(ci.chi_1)},
               {"fixed_point_residual", num(ci.fixed_point_residual)},
               {"q_star_consistency", num(consistency)},
               {"Q_map_slope", num(ci.Q_star_slope)},
               {"Q_star_stable", ci.Q_star_stable}}}};
      } else {
        const double sv2 = f.sigma_v * f.sigma_v;
        const double sb2 = f.sigma_b * f.sigma_b;
        const CriticalInit ci = critical_vanilla(sv2, sb2, f.R);
        j = {{"model", "vanilla"},
             {"sigma_w2", num(ci.sigma_w2)},
             {"sigma_v2", num(ci.sigma_v2)},
             {"sigma_b2", num(ci.sigma_b2)},
             {"sigma_w", num(std::sqrt(ci.sigma_w2))},
             {"sigma_v", num(std::sqrt(ci.sigma_v2))},
             {"sigma_b", num(std::sqrt(ci.sigma_b2))},
             {"q_star", num(ci.q_star)},
             {"R", num(ci.R)},
             {"verification", {{"chi_1", num(ci.chi_1)}, {"fixed_point_residual", num(ci.fixed_point_residual)}}}};
      }
      emit(f, out, j.dump(2) + "\n");
    } else {
      sim.model = f.kind();
      sim.minimal = f.minimal();
      sim.vanilla = f.vanilla();
      sim.weight_kind = weight_kind(weights);
      sim.threads = f.resolved_threads();
      if (sim.T < 1) throw UsageError("--T must be at least 1");
      if (!schedule.empty()) sim.sigma_schedule = parse_sigma_schedule(schedule, sim.T);
      if (simulate->parsed()) {
        const EnsembleTrace tr = run_forward(sim);
        const bool minimal = sim.model == Model::minimal;
        std::string text = "t,c_theory,c_mc,c_mc_stderr,q_theory,q_mc,Q_mc,C_mc\n";
        for (const TraceRow& r : tr.rows) {
          text += fmt::format("{},{},{},{},{},{},{},{}\n", r.t, csv_number(r.c_theory), csv_number(r.c_mc),
                              csv_number(r.c_mc_stderr), csv_number(r.q_theory), csv_number(r.q_mc),
                              minimal ? csv_number(r.Q_mc) : "", minimal ? csv_number(r.C_mc) : "");
        }
        emit(f, out, text);
      } else {
        if (!checkpoints.empty())
          for (double cp : parse_list(checkpoints, "checkpoint")) sim.checkpoints.push_back(static_cast<int>(cp));
        sim.eigenvalues = !no_eigenvalues;
        const SpectrumResult sr = jacobian_spectrum(sim);
        json j;
        j["model"] = f.model;
        j["weights"] = weights;
        j["params"] = params_json(f);
        j["N"] = sim.N;
        j["ensembles"] = sim.ensembles;
        j["tied"] = sim.tied;
        j["seed"] = sim.seed;
        j["chi_1"] = num(sr.chi_1);
        if (sr.moments)
          j["moments"] = {{"mu1", num(sr.moments->mu1)},
                          {"var1", num(sr.moments->var1)},
                          {"mu2", num(sr.moments->mu2)},
                          {"var2", num(sr.moments->var2)}};
        json cps = json::array();
        auto ratio = [](double a, double b) { return a == b ? 1.0 : a / b; };
        for (const SpectrumCheckpoint& cp : sr.checkpoints) {
          json e = {{"mean", num(cp.mean)},
                    {"mean_stderr", num(cp.mean_stderr)},
                    {"variance", num(cp.variance)},
                    {"variance_stderr", num(cp.variance_stderr)},
                    {"second_moment", num(cp.second_moment)},
                    {"second_moment_stderr", num(cp.second_moment_stderr)}};
          if (cp.log_sv_mean) {
            e["log_singular_value_mean"] = num(*cp.log_sv_mean);
            e["singular_value_min"] = num(*cp.sv_min);
            e["singular_value_max"] = num(*cp.sv_max);
          }
          json th = {{"mean", num(cp.theory_mean)}};
          json ra = {{"mean", num(ratio(cp.mean, cp.theory_mean))}};
          if (cp.theory_variance) {
            th["variance"] = num(*cp.theory_variance);
            // The closed form is E[lambda^2]; this is the variance it implies.
            th["variance_if_second_moment"] = num(*cp.theory_variance - cp.theory_mean * cp.theory_mean);
            ra["variance"] = num(ratio(cp.variance, *cp.theory_variance));
            ra["second_moment"] = num(ratio(cp.second_moment, *cp.theory_variance));
          }
          cps.push_back({{"T", cp.T}, {"empirical", e}, {"theory", th}, {"ratios", ra}});
        }
        j["checkpoints"] = cps;
        emit(f, out, j.dump(2) + "\n");
      }
    }
  } catch (const ConvergenceError& e) {
    json j = {{"error", "no_convergence"},
              {"message", e.what()},
              {"last_iterate", num(e.last_iterate())},
              {"residual", num(e.residual())},
              {"iterations", e.iterations()}};
    err << j.dump(2) << "\n";
    return kNoConvergence;
  } catch (const InfeasibleError& e) {
    json j = {{"error", "infeasible"}, {"message", e.what()}, {"constraint", e.constraint()},
              {"violation", num(e.violation())}};
    if (e.min_feasible_q_star() > 0.0) j["min_feasible_q_star"] = num(e.min_feasible_q_star());
    err << j.dump(2) << "\n";
    return kInfeasible;
  } catch (const ResourceError& e) {
    err << json{{"error", "resource_budget"}, {"message", e.what()}}.dump(2) << "\n";
    return kResourceBudget;
  } catch (const DegenerateStateError& e) {
    err << json{{"error", "degenerate"}, {"message", e.what()}}.dump(2) << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump(2) << "\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace rnnmf::cli
