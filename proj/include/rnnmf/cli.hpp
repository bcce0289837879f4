#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rnnmf::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNoConvergence = 2,
  kInfeasible = 3,
  kResourceBudget = 4,
};

/// Entry point shared by the executable and the tests; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One axis of a phase-diagram sweep: `axis:start:stop:step` or `axis:start:stop:nCOUNT`.
struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

SweepAxis parse_sweep(const std::string& spec);

/// Sigma^t for t = 1..T from a comma list, `const:x`, `step:t0` (0 before t0, 1 from t0 on)
/// or `step:t0:a:b`.
std::vector<double> parse_sigma_schedule(const std::string& spec, int T);

/// Numbers as written to CSV: 10 significant digits, `inf` for infinities.
std::string csv_number(double x);

}  // namespace rnnmf::cli
