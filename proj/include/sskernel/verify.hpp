#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sskernel::verify {

/// Problem sizes and trial counts of the property suites. Defaults match the
/// scale the suites are specified at.
struct Scale {
  int inverse_n_max = 30;        // closed-form inverse / factorization / column sums
  int completion_n_max = 20;          // completion-equals-kernel sweep
  int logdet_lu_n_max = 12;      // dense-LU cross-check cap
  int logdet_formula_n_max = 200;
  int random_instances = 50;     // banded-inverse and oracle suites
  int stationarity_trials = 20;
  int dual_form_problems = 20;
  int e2e_seeds = 20;
  int e2e_samples = 500;
  int e2e_order = 50;
  std::uint64_t seed = 20260810;
};

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Canonical suite names, in run order.
const std::vector<std::string>& suite_names();

/// Run one suite by name; throws std::invalid_argument for unknown names.
SuiteResult run_suite(const std::string& name, const Scale& scale);

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, const Scale& scale);

std::vector<SuiteResult> run_all(const Scale& scale);

}  // namespace sskernel::verify
