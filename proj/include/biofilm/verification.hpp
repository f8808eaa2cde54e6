#pragma once

#include <string>
#include <vector>

namespace biofilm {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// geometry, fem, mechanics, shape-derivative, transport, concentration,
/// moving-diffusion, coupled.
std::vector<std::string> verification_suites();

SuiteResult run_verification_suite(const std::string& name);

/// Runs every suite in order.
std::vector<SuiteResult> run_all_verifications();

/// Finite-difference consistency study on the standard moving slab
/// (unit strip, graph height 1 + 0.1 t): solves at t and t + delta, pulls
/// both back, and compares the material quotient against the solved rate
/// plus the convective term. orders are base-10 between consecutive deltas.
struct RateStudy {
  std::vector<double> deltas;
  std::vector<double> rel_errors;
  std::vector<double> orders;
  double comparator_norm = 0.0;
};

RateStudy shape_derivative_displacement_study(int n, double t,
                                              const std::vector<double>& deltas);
RateStudy shape_derivative_pressure_study(int n, double t, const std::vector<double>& deltas);

}  // namespace biofilm
