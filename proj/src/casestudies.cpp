#include "layerfit/casestudies.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "layerfit/errors.hpp"
#include "layerfit/parallel.hpp"
#include "layerfit/rng.hpp"
#include "layerfit/statcore.hpp"

namespace layerfit::casestudies {
namespace {

long long round_half_up(double v) {
  return static_cast<long long>(std::floor(v + 0.5));
}

// First and second moments of one sampled group, accumulated in one pass.
struct GroupStats {
  double sum = 0.0;
  double sumsq = 0.0;
};

GroupStats draw_group(Rng& rng, long long n, double mu, double sigma) {
  GroupStats g;
  for (long long i = 0; i < n; ++i) {
    const double x = mu + sigma * rng.normal();
    g.sum += x;
    g.sumsq += x * x;
  }
  return g;
}

// One-sided p-value for treatment mean exceeding placebo mean from equal-size
// groups: pooled equal-variance t by default, Welch-Satterthwaite otherwise.
// A degenerate zero-variance sample resolves by the sign of the difference.
double stage_p_value(const GroupStats& t, const GroupStats& p, long long n,
                     bool welch) {
  const double nn = static_cast<double>(n);
  const double mean_t = t.sum / nn;
  const double mean_p = p.sum / nn;
  const double ss_t = t.sumsq - nn * mean_t * mean_t;
  const double ss_p = p.sumsq - nn * mean_p * mean_p;
  const double diff = mean_t - mean_p;
  double tstat = 0.0;
  double df = 0.0;
  if (welch) {
    const double var_t = ss_t / (nn - 1.0);
    const double var_p = ss_p / (nn - 1.0);
    const double se2 = var_t / nn + var_p / nn;
    if (!(se2 > 0.0)) return diff > 0.0 ? 0.0 : (diff < 0.0 ? 1.0 : 0.5);
    tstat = diff / std::sqrt(se2);
    const double a = var_t / nn;
    const double b = var_p / nn;
    df = se2 * se2 / ((a * a + b * b) / (nn - 1.0));
  } else {
    const double pooled = (ss_t + ss_p) / (2.0 * nn - 2.0);
    if (!(pooled > 0.0)) return diff > 0.0 ? 0.0 : (diff < 0.0 ? 1.0 : 0.5);
    tstat = diff / std::sqrt(pooled * 2.0 / nn);
    df = 2.0 * nn - 2.0;
  }
  return statcore::student_t_sf(tstat, df);
}

// Phi^{-1}(1 - p) = -Phi^{-1}(p); the clamp keeps arguments inside the open
// quantile domain without changing any value the test can actually produce.
double z_of_p(double p) {
  return -statcore::normal_quantile(std::clamp(p, 1e-300, 1.0 - 1e-16));
}

void validate(const TrialDesign& d) {
  if (d.n1 < 2) throw config_error("trial: n1 must be at least 2");
  if (round_half_up(0.5 * d.n1) < 2)
    throw config_error(
        "trial: n1 too small for the reduced stage-2 group size");
  if (!(d.sigma_t > 0.0) || !(d.sigma_p > 0.0))
    throw config_error("trial: group SDs must be positive");
  if (!(d.alpha > 0.0) || !(d.alpha < 1.0))
    throw config_error("trial: alpha must lie in (0, 1)");
  if (std::isnan(d.delta)) throw config_error("trial: delta must not be NaN");
  if (d.mc_reps < 1) throw config_error("trial: mc_reps must be at least 1");
}

void validate(const TrialRanges& r) {
  if (!(r.mu0_lo <= r.mu0_hi) || !(r.alpha_lo <= r.alpha_hi) ||
      r.n1_lo > r.n1_hi)
    throw config_error("trial ranges: each lo bound must not exceed its hi");
  TrialDesign probe;
  probe.n1 = r.n1_lo;
  probe.delta = r.delta;
  probe.sigma_t = r.sigma_t;
  probe.sigma_p = r.sigma_p;
  probe.alpha = r.alpha_lo;
  probe.mu0 = r.mu0_lo;
  probe.mc_reps = r.mc_reps;
  validate(probe);
  if (!(r.alpha_hi < 1.0))
    throw config_error("trial ranges: alpha_hi must lie below 1");
}

void validate(const GngDesign& d) {
  if (d.n < 1) throw config_error("gng: n must be at least 1");
  if (!(d.q_a > 0.0) || !(d.q_b > 0.0))
    throw config_error("gng: prior parameters must be positive");
  if (!(d.t_min >= 0.0) || !(d.t_base >= d.t_min) || !(d.t_base <= 1.0))
    throw config_error("gng: need 0 <= t_min <= t_base <= 1");
  if (!(d.tau_min >= 0.0) || !(d.tau_min <= 1.0) || !(d.tau_base >= 0.0) ||
      !(d.tau_base <= 1.0))
    throw config_error("gng: decision thresholds must lie in [0, 1]");
  if (!(d.q0 >= 0.0) || !(d.q0 <= 1.0))
    throw config_error("gng: q0 must lie in [0, 1]");
}

void validate(const GngRanges& r) {
  if (r.n < 1) throw config_error("gng ranges: n must be at least 1");
  if (!(r.q_a > 0.0) || !(r.q_b > 0.0))
    throw config_error("gng ranges: prior parameters must be positive");
  if (!(r.tmin_lo <= r.tmin_hi) || !(r.tbase_add_lo <= r.tbase_add_hi) ||
      !(r.q0_lo <= r.q0_hi))
    throw config_error("gng ranges: each lo bound must not exceed its hi");
  if (!(r.tmin_lo >= 0.0) || !(r.tbase_add_lo >= 0.0))
    throw config_error("gng ranges: profile bounds must be nonnegative");
  if (!(r.tmin_hi + r.tbase_add_hi <= 1.0))
    throw config_error("gng ranges: t_base upper end exceeds 1");
  if (!(r.q0_lo >= 0.0) || !(r.q0_hi <= 1.0))
    throw config_error("gng ranges: q0 bounds must lie in [0, 1]");
  if (!(r.tau_min >= 0.0) || !(r.tau_min <= 1.0) || !(r.tau_base >= 0.0) ||
      !(r.tau_base <= 1.0))
    throw config_error("gng ranges: decision thresholds must lie in [0, 1]");
}

void validate(const FisherDesign& d) {
  if (d.n < 1) throw config_error("fisher: n must be at least 1");
  if (!(d.alpha_level > 0.0) || !(d.alpha_level < 1.0))
    throw config_error("fisher: alpha level must lie in (0, 1)");
}

void fill_fisher_row(Dataset& out, std::size_t i, int q1, int q2,
                     const FisherDesign& design) {
  out.features[i * 3 + 0] = static_cast<double>(q1);
  out.features[i * 3 + 1] = static_cast<double>(q2);
  out.features[i * 3 + 2] = static_cast<double>(design.n);
  const double p = statcore::fisher_exact_one_sided_greater(q1, q2, design.n);
  const bool significant = p < design.alpha_level;
  out.targets[i * 2 + 0] = significant ? 0.0 : 1.0;
  out.targets[i * 2 + 1] = significant ? 1.0 : 0.0;
}

}  // namespace

double trial_power(const TrialDesign& design, std::uint64_t seed) {
  validate(design);
  const double z_crit = -statcore::normal_quantile(design.alpha);
  const long long n_small = round_half_up(0.5 * design.n1);
  const long long n_large = 2LL * design.n1;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Rng rng(seed);
  long long rejections = 0;
  for (int rep = 0; rep < design.mc_reps; ++rep) {
    const GroupStats t1 = draw_group(rng, design.n1, design.mu0, design.sigma_t);
    const GroupStats p1 = draw_group(rng, design.n1, 0.0, design.sigma_p);
    const double delta1 = t1.sum / design.n1 - p1.sum / design.n1;
    const long long n2 = delta1 >= design.delta ? n_small : n_large;
    const GroupStats t2 = draw_group(rng, n2, design.mu0, design.sigma_t);
    const GroupStats p2 = draw_group(rng, n2, 0.0, design.sigma_p);
    const double p_one = stage_p_value(t1, p1, design.n1, design.welch);
    const double p_two = stage_p_value(t2, p2, n2, design.welch);
    const double z = (z_of_p(p_one) + z_of_p(p_two)) * inv_sqrt2;
    if (z >= z_crit) ++rejections;
  }
  return static_cast<double>(rejections) / design.mc_reps;
}

Dataset gen_trial_dataset(std::size_t n, const TrialRanges& ranges,
                          std::uint64_t seed) {
  if (n == 0) throw config_error("trial dataset: need at least one row");
  validate(ranges);
  Dataset out;
  out.task = Task::regression;
  out.rows = n;
  out.cols = 3;
  out.target_width = 1;
  out.feature_names = {"mu0", "alpha", "beta"};
  out.target_names = {"y"};
  out.features.assign(n * 3, 0.0);
  out.targets.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    Rng row_rng(derive_seed(seed, i, 0));
    TrialDesign d;
    d.delta = ranges.delta;
    d.sigma_t = ranges.sigma_t;
    d.sigma_p = ranges.sigma_p;
    d.mc_reps = ranges.mc_reps;
    d.mu0 = row_rng.uniform(ranges.mu0_lo, ranges.mu0_hi);
    d.alpha = row_rng.uniform(ranges.alpha_lo, ranges.alpha_hi);
    d.n1 = static_cast<int>(row_rng.uniform_int(ranges.n1_lo, ranges.n1_hi));
    const double power = trial_power(d, derive_seed(seed, i, 1));
    out.features[i * 3 + 0] = d.mu0;
    out.features[i * 3 + 1] = d.alpha;
    out.features[i * 3 + 2] = 1.0 - power;
    // Sample size rescaled by the 60-patient reference maximum.
    out.targets[i] = static_cast<double>(d.n1) / 60.0;
  });
  return out;
}

double gng_expected_go(const GngDesign& design) {
  validate(design);
  double total = 0.0;
  for (int nr = 0; nr <= design.n; ++nr) {
    const double a = design.q_a + nr;
    const double b = design.q_b + (design.n - nr);
    const bool go = statcore::beta_tail(design.t_min, a, b) > design.tau_min &&
                    statcore::beta_tail(design.t_base, a, b) > design.tau_base;
    if (go) total += statcore::binom_pmf(nr, design.n, design.q0);
  }
  return total;
}

Dataset gng_dataset(std::size_t n, const GngRanges& ranges, GngInputMode mode,
                    std::uint64_t seed) {
  if (n == 0) throw config_error("gng dataset: need at least one row");
  validate(ranges);
  Dataset out;
  out.task = Task::regression;
  out.rows = n;
  out.cols = 3;
  out.target_width = 1;
  out.feature_names =
      mode == GngInputMode::original
          ? std::vector<std::string>{"tmin", "tbase", "q0"}
          : std::vector<std::string>{"post_min", "post_base", "q0"};
  out.target_names = {"y"};
  out.features.assign(n * 3, 0.0);
  out.targets.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    // One draw stream per row, independent of the input mode, so both modes
    // produce identical designs and therefore identical targets.
    Rng rng(derive_seed(seed, i, 0));
    GngDesign d;
    d.n = ranges.n;
    d.q_a = ranges.q_a;
    d.q_b = ranges.q_b;
    d.tau_min = ranges.tau_min;
    d.tau_base = ranges.tau_base;
    d.t_min = rng.uniform(ranges.tmin_lo, ranges.tmin_hi);
    d.t_base = d.t_min + rng.uniform(ranges.tbase_add_lo, ranges.tbase_add_hi);
    d.q0 = rng.uniform(ranges.q0_lo, ranges.q0_hi);
    out.targets[i] = gng_expected_go(d);
    if (mode == GngInputMode::original) {
      out.features[i * 3 + 0] = d.t_min;
      out.features[i * 3 + 1] = d.t_base;
    } else {
      // Posterior tails at the expected responder pseudo-count n*q0 (real
      // valued; the Beta parameters need not be integers).
      const double a = d.q_a + d.n * d.q0;
      const double b = d.q_b + d.n - d.n * d.q0;
      out.features[i * 3 + 0] = statcore::beta_tail(d.t_min, a, b);
      out.features[i * 3 + 1] = statcore::beta_tail(d.t_base, a, b);
    }
    out.features[i * 3 + 2] = d.q0;
  });
  return out;
}

Dataset fisher_dataset(std::size_t n, const FisherDesign& design,
                       std::uint64_t seed) {
  if (n == 0) throw config_error("fisher dataset: need at least one row");
  validate(design);
  Dataset out;
  out.task = Task::classification;
  out.rows = n;
  out.cols = 3;
  out.target_width = 2;
  out.feature_names = {"q1", "q2", "n"};
  out.target_names = {"y0", "y1"};
  out.features.assign(n * 3, 0.0);
  out.targets.assign(n * 2, 0.0);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0));
    const int q1 = static_cast<int>(rng.uniform_int(0, design.n));
    const int q2 = static_cast<int>(rng.uniform_int(0, design.n));
    fill_fisher_row(out, i, q1, q2, design);
  });
  return out;
}

Dataset fisher_dataset_exhaustive(const FisherDesign& design) {
  validate(design);
  const std::size_t side = static_cast<std::size_t>(design.n) + 1;
  Dataset out;
  out.task = Task::classification;
  out.rows = side * side;
  out.cols = 3;
  out.target_width = 2;
  out.feature_names = {"q1", "q2", "n"};
  out.target_names = {"y0", "y1"};
  out.features.assign(out.rows * 3, 0.0);
  out.targets.assign(out.rows * 2, 0.0);
  parallel_for(out.rows, [&](std::size_t i) {
    const int q1 = static_cast<int>(i / side);
    const int q2 = static_cast<int>(i % side);
    fill_fisher_row(out, i, q1, q2, design);
  });
  return out;
}

}  // namespace layerfit::casestudies
