#pragma once

#include <cstdint>

#include "layerfit/dataset.hpp"

namespace layerfit::casestudies {

// --- two-stage adaptive trial ----------------------------------------------

// Two-group, two-stage design with interim sample-size adaptation: stage 2
// shrinks to half of n1 when the observed stage-1 effect reaches delta and
// doubles otherwise; each stage contributes a one-sided pooled two-sample
// t-test p-value, combined by the equal-weight inverse-normal rule.
struct TrialDesign {
  int n1 = 40;          // per-group stage-1 size
  double delta = 0.3;   // promising threshold for the stage-1 effect
  double sigma_t = 1.0;
  double sigma_p = 1.0;
  double alpha = 0.05;  // one-sided level
  double mu0 = 0.0;     // true treatment effect
  int mc_reps = 10000;
  bool welch = false;   // unequal-variance t with Satterthwaite df
};

// Monte Carlo rejection rate of the combined test. Deterministic given seed.
double trial_power(const TrialDesign& design, std::uint64_t seed);

struct TrialRanges {
  double mu0_lo = 0.1, mu0_hi = 0.6;
  double alpha_lo = 0.01, alpha_hi = 0.15;
  int n1_lo = 10, n1_hi = 60;
  double delta = 0.3;
  double sigma_t = 1.0, sigma_p = 1.0;
  int mc_reps = 10000;
};

// N rows of features (mu0, alpha, beta) with beta = 1 - power, target n1/60.
// Row draws and power replicates use per-row derived substreams, so the
// result is identical for any thread count.
Dataset gen_trial_dataset(std::size_t n, const TrialRanges& ranges,
                          std::uint64_t seed);

// --- Go/No-Go expected decision --------------------------------------------

struct GngDesign {
  int n = 40;             // trial size
  double q_a = 1.0;       // prior Beta(q_a, q_b)
  double q_b = 1.0;
  double t_min = 0.2;     // minimum target product profile
  double t_base = 0.3;    // base target product profile, >= t_min
  double tau_min = 0.8;   // posterior-probability thresholds
  double tau_base = 0.1;
  double q0 = 0.35;       // true response rate
};

// Exact expectation of the Go indicator over the Binomial(n, q0) responder
// count: Go at n_r requires Pr(q >= t_min | n_r) > tau_min and
// Pr(q >= t_base | n_r) > tau_base under the Beta posterior. No Monte Carlo.
double gng_expected_go(const GngDesign& design);

enum class GngInputMode {
  original,      // features (t_min, t_base, q0)
  intermediate,  // the two posterior tails at pseudo-count n*q0, plus q0
};

struct GngRanges {
  int n = 40;
  double q_a = 1.0, q_b = 1.0;
  double tau_min = 0.8, tau_base = 0.1;
  double tmin_lo = 0.1, tmin_hi = 0.3;
  double tbase_add_lo = 0.05, tbase_add_hi = 0.2;  // t_base = t_min + add
  double q0_lo = 0.1, q0_hi = 0.6;
};

// N rows with target gng_expected_go; the mode changes only the features, so
// one seed yields identical targets in both modes.
Dataset gng_dataset(std::size_t n, const GngRanges& ranges, GngInputMode mode,
                    std::uint64_t seed);

// --- Fisher-exact classification -------------------------------------------

struct FisherDesign {
  int n = 25;                 // per-group size
  double alpha_level = 0.05;  // one-sided significance cut
};

// Rows with features (q1, q2, n) and one-hot label (0,1) exactly when the
// one-sided p-value of group 2 exceeding group 1 is below alpha_level.
// Random mode draws (q1, q2) uniformly on {0..n}^2.
Dataset fisher_dataset(std::size_t n, const FisherDesign& design,
                       std::uint64_t seed);

// All (n+1)^2 count pairs in lexicographic order.
Dataset fisher_dataset_exhaustive(const FisherDesign& design);

}  // namespace layerfit::casestudies
