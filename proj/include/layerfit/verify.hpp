#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace layerfit::verify {

// One oracle suite outcome; detail is a single human-readable line with the
// worst observed deviation and the budget it ran under.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// N * MC at lambda = 2/N, r = p reproduces classical Mallows's Cp on random
// (SSE, sigma^2, N, p) tuples to 1e-10 relative accuracy.
CheckResult check_cp_identity(int tuples, std::uint64_t seed);

// Library Fisher p-values against an exhaustive exact-rational enumeration of
// every two-group table up to max_n per group: 1e-12 relative agreement and
// exact label agreement at the 0.05 cut.
CheckResult check_fisher_enumeration(int max_n);

// Exact expected Go probability against a Monte Carlo benchmark that draws
// responder counts as Bernoulli sums (no shared pmf code); 3 SE bands.
CheckResult check_gng_mc(int designs, int reps, std::uint64_t seed);

// Adaptive-trial rejection rate under mu0 = 0 matches the nominal level at
// alpha in {0.025, 0.05, 0.1} within 3 Monte Carlo SE.
CheckResult check_trial_null(int reps, std::uint64_t seed);

// The four suites at their standard budgets.
std::vector<CheckResult> run_all_checks();

}  // namespace layerfit::verify
