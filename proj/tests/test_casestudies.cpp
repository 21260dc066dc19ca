#include "layerfit/casestudies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "layerfit/errors.hpp"
#include "layerfit/rng.hpp"
#include "layerfit/statcore.hpp"

using namespace layerfit;
using namespace layerfit::casestudies;

namespace {

// Oracle: two-stage combination test whose stage sizes are fixed up front, so
// no adaptation logic is involved. Written from scratch with two-pass moments
// and per-sample storage, deliberately unlike the production accumulator.
double fixed_design_power(int na, int nb, double mu, double alpha, int reps,
                          std::uint64_t seed) {
  Rng rng(seed);
  const double z_crit = -statcore::normal_quantile(alpha);
  int hits = 0;
  std::vector<double> treat, placebo;
  for (int rep = 0; rep < reps; ++rep) {
    double z_sum = 0.0;
    for (int stage = 0; stage < 2; ++stage) {
      const int n = stage == 0 ? na : nb;
      treat.assign(n, 0.0);
      placebo.assign(n, 0.0);
      for (double& v : treat) v = mu + rng.normal();
      for (double& v : placebo) v = rng.normal();
      double mt = 0.0, mp = 0.0;
      for (double v : treat) mt += v;
      for (double v : placebo) mp += v;
      mt /= n;
      mp /= n;
      double vt = 0.0, vp = 0.0;
      for (double v : treat) vt += (v - mt) * (v - mt);
      for (double v : placebo) vp += (v - mp) * (v - mp);
      const double pooled = (vt + vp) / (2.0 * n - 2.0);
      const double tstat = (mt - mp) / std::sqrt(pooled * 2.0 / n);
      const double pval = statcore::student_t_sf(tstat, 2.0 * n - 2.0);
      z_sum -= statcore::normal_quantile(std::clamp(pval, 1e-300, 1.0 - 1e-16));
    }
    if (z_sum / std::sqrt(2.0) >= z_crit) ++hits;
  }
  return static_cast<double>(hits) / reps;
}

__int128 choose128(int n, int k) {
  if (k < 0 || k > n) return 0;
  __int128 c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Oracle: exact one-sided p-value numerator/denominator for the responder
// table. Significance against alpha = 1/20 is decided in integers, so the
// labels are free of any floating-point boundary effects.
struct ExactP {
  __int128 num, den;
};

ExactP fisher_p_exact(int q1, int q2, int n) {
  const int s = q1 + q2;
  __int128 num = 0;
  for (int j = q2; j <= std::min(n, s); ++j)
    num += choose128(n, j) * choose128(n, s - j);
  return {num, choose128(2 * n, s)};
}

bool oracle_significant(int q1, int q2, int n) {
  const ExactP p = fisher_p_exact(q1, q2, n);
  return 20 * p.num < p.den;
}

bool row_significant(const Dataset& d, std::size_t i) {
  REQUIRE(d.target_width == 2);
  const double y0 = d.targets[2 * i];
  const double y1 = d.targets[2 * i + 1];
  REQUIRE((y0 == 0.0 || y0 == 1.0));
  REQUIRE(y0 + y1 == 1.0);
  return y1 == 1.0;
}

GngDesign canonical_gng() {
  GngDesign d;
  d.n = 40;
  d.q_a = 1.0;
  d.q_b = 1.0;
  d.t_min = 0.2;
  d.t_base = 0.3;
  d.tau_min = 0.8;
  d.tau_base = 0.1;
  d.q0 = 0.35;
  return d;
}

}  // namespace

TEST_CASE("trial design validation rejects out-of-domain settings") {
  TrialDesign d;
  d.mc_reps = 1;

  auto rejects = [](TrialDesign bad) {
    CHECK_THROWS_AS(trial_power(bad, 1), config_error);
  };

  TrialDesign bad = d;
  bad.n1 = 1;
  rejects(bad);
  bad = d;
  bad.n1 = 2;  // promising branch would shrink stage 2 to a single subject
  rejects(bad);
  bad = d;
  bad.sigma_t = 0.0;
  rejects(bad);
  bad = d;
  bad.sigma_p = -1.0;
  rejects(bad);
  bad = d;
  bad.alpha = 0.0;
  rejects(bad);
  bad = d;
  bad.alpha = 1.0;
  rejects(bad);
  bad = d;
  bad.mc_reps = 0;
  rejects(bad);
  bad = d;
  bad.delta = std::numeric_limits<double>::quiet_NaN();
  rejects(bad);

  TrialDesign ok = d;
  ok.n1 = 3;  // reduced stage-2 size rounds 1.5 up to 2
  CHECK_NOTHROW(trial_power(ok, 1));
  ok = d;
  ok.delta = std::numeric_limits<double>::infinity();
  CHECK_NOTHROW(trial_power(ok, 1));
}

TEST_CASE("null trial keeps its one-sided size") {
  TrialDesign d;
  d.n1 = 40;
  d.mu0 = 0.0;
  d.alpha = 0.05;
  d.mc_reps = 100000;
  const double size = trial_power(d, 20260401);
  CHECK(size >= 0.0);
  CHECK(size <= 1.0);
  CHECK(std::abs(size - 0.05) <= 0.004);

  // The unequal-variance variant stays close to nominal as well.
  TrialDesign w = d;
  w.welch = true;
  w.mc_reps = 20000;
  CHECK(std::abs(trial_power(w, 20260402) - 0.05) <= 0.012);
}

TEST_CASE("strong effects push power to one") {
  TrialDesign d;
  d.n1 = 40;
  d.mu0 = 1.5;
  d.mc_reps = 10000;
  const double power = trial_power(d, 7);
  CHECK(power >= 0.999);
  CHECK(power <= 1.0);
}

TEST_CASE("infinite promising threshold reduces to the fixed design") {
  // delta = +inf: stage 1 is never promising, so stage 2 doubles; delta=-inf:
  // always promising, so stage 2 halves. Either way the size rule becomes a
  // constant and an independent fixed-design simulator must agree.
  const int reps = 40000;

  TrialDesign d;
  d.n1 = 30;
  d.mu0 = 0.3;
  d.delta = std::numeric_limits<double>::infinity();
  d.mc_reps = reps;
  const double doubled = trial_power(d, 9101);
  const double doubled_ref = fixed_design_power(30, 60, 0.3, 0.05, reps, 8282);
  CHECK(std::abs(doubled - doubled_ref) <= 0.012);

  d.mu0 = 0.5;
  d.delta = -std::numeric_limits<double>::infinity();
  const double halved = trial_power(d, 9102);
  const double halved_ref = fixed_design_power(30, 15, 0.5, 0.05, reps, 8383);
  CHECK(std::abs(halved - halved_ref) <= 0.012);
}

TEST_CASE("power rises with effect size and with stage-one size") {
  const double slack = 0.015;  // 3 MC SE headroom at 2*10^4 replicates

  TrialDesign d;
  d.n1 = 40;
  d.mc_reps = 20000;
  double prev = -1.0;
  for (double mu : {0.0, 0.3, 0.6, 0.9}) {
    d.mu0 = mu;
    const double p = trial_power(d, 411);
    CHECK(p >= prev - slack);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }

  d.mu0 = 0.4;
  prev = -1.0;
  for (int n1 : {10, 25, 40, 60}) {
    d.n1 = n1;
    const double p = trial_power(d, 412);
    CHECK(p >= prev - slack);
    prev = p;
  }
}

TEST_CASE("trial power is deterministic in the seed") {
  TrialDesign d;
  d.n1 = 20;
  d.mu0 = 0.3;
  d.mc_reps = 2000;
  const double a = trial_power(d, 555);
  const double b = trial_power(d, 555);
  CHECK(a == b);
  CHECK(trial_power(d, 556) != a);

  TrialDesign w = d;
  w.welch = true;
  CHECK(trial_power(w, 555) != a);
}

TEST_CASE("trial dataset carries the design tuple and induced beta") {
  TrialRanges ranges;
  ranges.mc_reps = 2000;
  const Dataset data = gen_trial_dataset(12, ranges, 31);

  CHECK(data.task == Task::regression);
  CHECK(data.rows == 12);
  CHECK(data.cols == 3);
  CHECK(data.target_width == 1);
  CHECK(data.feature_names == std::vector<std::string>{"mu0", "alpha", "beta"});
  CHECK(data.target_names == std::vector<std::string>{"y"});

  std::set<double> mu0s;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const double mu0 = data.features[i * 3 + 0];
    const double alpha = data.features[i * 3 + 1];
    const double beta = data.features[i * 3 + 2];
    CHECK(mu0 >= 0.1);
    CHECK(mu0 <= 0.6);
    CHECK(alpha >= 0.01);
    CHECK(alpha <= 0.15);
    CHECK(beta >= 0.0);
    CHECK(beta <= 1.0);
    mu0s.insert(mu0);

    const double scaled = 60.0 * data.targets[i];
    const long long n1 = std::llround(scaled);
    CHECK(std::abs(scaled - static_cast<double>(n1)) <= 1e-9);
    CHECK(n1 >= 10);
    CHECK(n1 <= 60);
  }
  CHECK(mu0s.size() == data.rows);  // distinct per-row draw streams

  // Bit-deterministic regeneration.
  const Dataset again = gen_trial_dataset(12, ranges, 31);
  CHECK(again.features == data.features);
  CHECK(again.targets == data.targets);

  // Regeneration oracle: rebuild each row's design and re-estimate its power
  // with an unrelated seed; the stored beta must agree within Monte Carlo
  // error (3 SE of a difference of two 2000-replicate estimates ~ 0.05).
  for (std::size_t i = 0; i < 5; ++i) {
    TrialDesign d;
    d.mu0 = data.features[i * 3 + 0];
    d.alpha = data.features[i * 3 + 1];
    d.n1 = static_cast<int>(std::llround(60.0 * data.targets[i]));
    d.delta = ranges.delta;
    d.mc_reps = ranges.mc_reps;
    const double beta_re = 1.0 - trial_power(d, 90000 + i);
    CHECK(std::abs(beta_re - data.features[i * 3 + 2]) <= 0.05);
  }

  CHECK_THROWS_AS(gen_trial_dataset(0, ranges, 1), config_error);
  TrialRanges bad = ranges;
  bad.mu0_lo = 0.7;  // above mu0_hi
  CHECK_THROWS_AS(gen_trial_dataset(3, bad, 1), config_error);
  bad = ranges;
  bad.n1_lo = 2;  // reduced stage-2 size would collapse
  CHECK_THROWS_AS(gen_trial_dataset(3, bad, 1), config_error);
  bad = ranges;
  bad.alpha_hi = 1.0;
  CHECK_THROWS_AS(gen_trial_dataset(3, bad, 1), config_error);
}

TEST_CASE("expected go handles the degenerate profiles") {
  // Zero profiles: both posterior tails equal 1, so every responder count
  // votes Go and the expectation is the full binomial mass.
  GngDesign d = canonical_gng();
  d.t_min = 0.0;
  d.t_base = 0.0;
  CHECK(std::abs(gng_expected_go(d) - 1.0) <= 1e-12);

  // q0 = 0 concentrates the responder count at zero, so the result is the Go
  // indicator at n_r = 0. Under the canonical profiles that indicator is No.
  d = canonical_gng();
  d.q0 = 0.0;
  CHECK(gng_expected_go(d) == 0.0);

  // ...and with a nearly-zero profile the same indicator flips to Go.
  d.t_min = 0.001;
  d.t_base = 0.001;
  CHECK(gng_expected_go(d) == 1.0);

  // q0 = 1 concentrates at n_r = n where the posterior is overwhelming.
  d = canonical_gng();
  d.q0 = 1.0;
  CHECK(gng_expected_go(d) == 1.0);

  auto rejects = [](GngDesign bad) {
    CHECK_THROWS_AS(gng_expected_go(bad), config_error);
  };
  d = canonical_gng();
  d.n = 0;
  rejects(d);
  d = canonical_gng();
  d.q_a = 0.0;
  rejects(d);
  d = canonical_gng();
  d.t_base = 0.1;  // below t_min
  rejects(d);
  d = canonical_gng();
  d.tau_min = 1.5;
  rejects(d);
  d = canonical_gng();
  d.q0 = -0.1;
  rejects(d);
}

TEST_CASE("expected go matches the exact reference design") {
  const GngDesign d = canonical_gng();
  const double value = gng_expected_go(d);
  CHECK(std::abs(value - 0.9355643282585071) <= 1e-10);

  // The Go region for this design is exactly {10, ..., 40}: verify the
  // indicator boundary, then re-sum its binomial mass with an independent
  // long-double pmf recurrence.
  for (int nr = 0; nr <= 40; ++nr) {
    const double a = 1.0 + nr;
    const double b = 1.0 + 40 - nr;
    const bool go = statcore::beta_tail(0.2, a, b) > 0.8 &&
                    statcore::beta_tail(0.3, a, b) > 0.1;
    CHECK(go == (nr >= 10));
  }
  const long double q0 = 0.35L;
  long double pmf = std::pow(1.0L - q0, 40);
  long double mass = 0.0L;
  for (int k = 0; k <= 40; ++k) {
    if (k >= 10) mass += pmf;
    pmf *= (40 - k) / (k + 1.0L) * (q0 / (1.0L - q0));
  }
  CHECK(std::abs(value - static_cast<double>(mass)) <= 1e-12);

  // Posterior tails at the expected responder count 40 * 0.35 = 14.
  CHECK(std::abs(statcore::beta_tail(0.2, 15.0, 27.0) - 0.9897858431154547) <=
        1e-12);
  CHECK(std::abs(statcore::beta_tail(0.3, 15.0, 27.0) - 0.7761884916642559) <=
        1e-12);
}

TEST_CASE("expected go agrees with Monte Carlo on random designs") {
  Rng design_rng(20240822);
  for (int trial = 0; trial < 5; ++trial) {
    GngDesign d = canonical_gng();
    d.t_min = design_rng.uniform(0.1, 0.3);
    d.t_base = d.t_min + design_rng.uniform(0.05, 0.2);
    d.q0 = design_rng.uniform(0.1, 0.6);
    const double exact = gng_expected_go(d);

    std::vector<bool> go(static_cast<std::size_t>(d.n) + 1);
    for (int nr = 0; nr <= d.n; ++nr) {
      const double a = d.q_a + nr;
      const double b = d.q_b + (d.n - nr);
      go[nr] = statcore::beta_tail(d.t_min, a, b) > d.tau_min &&
               statcore::beta_tail(d.t_base, a, b) > d.tau_base;
    }
    const int reps = 200000;
    Rng mc_rng(derive_seed(616, trial));
    long long hits = 0;
    for (int rep = 0; rep < reps; ++rep) {
      int responders = 0;
      for (int i = 0; i < d.n; ++i)
        if (mc_rng.uniform() < d.q0) ++responders;
      if (go[responders]) ++hits;
    }
    const double mc = static_cast<double>(hits) / reps;
    const double se = std::sqrt(exact * (1.0 - exact) / reps);
    // 4 SE: loose enough for these frozen draws, while any real defect moves
    // the value by at least one binomial pmf term (~1e-2, far outside).
    CHECK(std::abs(mc - exact) <= 4.0 * se + 1e-9);
  }
}

TEST_CASE("expected go never rises as the profiles tighten") {
  GngDesign d = canonical_gng();
  d.t_base = 0.35;
  double prev = 2.0;
  for (double t : {0.10, 0.15, 0.20, 0.25, 0.30}) {
    d.t_min = t;
    const double v = gng_expected_go(d);
    CHECK(v <= prev);
    prev = v;
  }

  d = canonical_gng();
  d.t_min = 0.1;
  prev = 2.0;
  for (double t : {0.15, 0.25, 0.35, 0.45}) {
    d.t_base = t;
    const double v = gng_expected_go(d);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("gng dataset modes share targets and differ in features") {
  GngRanges ranges;
  const Dataset orig = gng_dataset(60, ranges, GngInputMode::original, 77);
  const Dataset post = gng_dataset(60, ranges, GngInputMode::intermediate, 77);

  CHECK(orig.task == Task::regression);
  CHECK(orig.rows == 60);
  CHECK(orig.cols == 3);
  CHECK(orig.feature_names ==
        std::vector<std::string>{"tmin", "tbase", "q0"});
  CHECK(post.feature_names ==
        std::vector<std::string>{"post_min", "post_base", "q0"});
  CHECK(orig.target_names == std::vector<std::string>{"y"});

  // Identical designs row by row: same targets, same q0 column.
  CHECK(orig.targets == post.targets);
  for (std::size_t i = 0; i < orig.rows; ++i)
    CHECK(orig.features[i * 3 + 2] == post.features[i * 3 + 2]);
  CHECK(orig.features != post.features);

  for (std::size_t i = 0; i < orig.rows; ++i) {
    const double tmin = orig.features[i * 3 + 0];
    const double tbase = orig.features[i * 3 + 1];
    const double q0 = orig.features[i * 3 + 2];
    CHECK(tmin >= 0.1);
    CHECK(tmin <= 0.3);
    CHECK(tbase - tmin >= 0.05 - 1e-12);
    CHECK(tbase - tmin <= 0.2 + 1e-12);
    CHECK(q0 >= 0.1);
    CHECK(q0 <= 0.6);
    CHECK(orig.targets[i] >= 0.0);
    CHECK(orig.targets[i] <= 1.0);

    // Intermediate features are the posterior tails at pseudo-count n*q0.
    const double a = ranges.q_a + ranges.n * q0;
    const double b = ranges.q_b + ranges.n - ranges.n * q0;
    CHECK(post.features[i * 3 + 0] == statcore::beta_tail(tmin, a, b));
    CHECK(post.features[i * 3 + 1] == statcore::beta_tail(tbase, a, b));
    CHECK(post.features[i * 3 + 0] >= post.features[i * 3 + 1]);
    CHECK(post.features[i * 3 + 0] >= 0.0);
    CHECK(post.features[i * 3 + 0] <= 1.0);
    CHECK(post.features[i * 3 + 1] >= 0.0);
    CHECK(post.features[i * 3 + 1] <= 1.0);
  }

  const Dataset again = gng_dataset(60, ranges, GngInputMode::intermediate, 77);
  CHECK(again.features == post.features);
  CHECK(again.targets == post.targets);

  // Pinning every range to a point reproduces the canonical design row.
  GngRanges pin;
  pin.tmin_lo = pin.tmin_hi = 0.2;
  pin.tbase_add_lo = pin.tbase_add_hi = 0.1;
  pin.q0_lo = pin.q0_hi = 0.35;
  const Dataset one = gng_dataset(1, pin, GngInputMode::intermediate, 5);
  CHECK(std::abs(one.features[0] - 0.9897858431154547) <= 1e-10);
  CHECK(std::abs(one.features[1] - 0.7761884916642559) <= 1e-10);
  CHECK(std::abs(one.targets[0] - 0.9355643282585071) <= 1e-10);

  // Larger t_min at a fixed q0 lowers the first posterior feature.
  GngRanges lo = pin, hi = pin;
  lo.tmin_lo = lo.tmin_hi = 0.15;
  hi.tmin_lo = hi.tmin_hi = 0.25;
  const Dataset f_lo = gng_dataset(1, lo, GngInputMode::intermediate, 5);
  const Dataset f_hi = gng_dataset(1, hi, GngInputMode::intermediate, 5);
  CHECK(f_hi.features[0] < f_lo.features[0]);

  CHECK_THROWS_AS(gng_dataset(0, ranges, GngInputMode::original, 1),
                  config_error);
  GngRanges bad = ranges;
  bad.tmin_hi = 0.9;  // t_base could then exceed 1
  CHECK_THROWS_AS(gng_dataset(3, bad, GngInputMode::original, 1), config_error);
  bad = ranges;
  bad.tbase_add_lo = -0.05;  // would break t_min <= t_base
  CHECK_THROWS_AS(gng_dataset(3, bad, GngInputMode::original, 1), config_error);
  bad = ranges;
  bad.q0_hi = 1.2;
  CHECK_THROWS_AS(gng_dataset(3, bad, GngInputMode::original, 1), config_error);
}

TEST_CASE("fisher boundary cases pin the label convention") {
  // Equal counts can never land in the rejection side.
  for (int q = 0; q <= 10; ++q)
    CHECK(statcore::fisher_exact_one_sided_greater(q, q, 10) >= 0.5);

  // The most lopsided 10-vs-10 table: p = 1 / C(20, 10).
  const double p_extreme = statcore::fisher_exact_one_sided_greater(0, 10, 10);
  CHECK(std::abs(p_extreme - 1.0 / 184756.0) <= 1e-16);

  FisherDesign d10;
  d10.n = 10;
  const Dataset ex = fisher_dataset_exhaustive(d10);
  CHECK(row_significant(ex, 0 * 11 + 10));   // (0, 10): decisive
  CHECK(!row_significant(ex, 5 * 11 + 5));   // (5, 5): equal counts

  // n = 3 holds the one exact p = 1/20 tie in the small-n grid: (q1, q2) =
  // (0, 3). The correctly rounded p-value is exactly the double 0.05, so the
  // strict comparison must leave the cell non-significant.
  FisherDesign d3;
  d3.n = 3;
  const double p_tie = statcore::fisher_exact_one_sided_greater(0, 3, 3);
  CHECK(p_tie == 0.05);
  const Dataset ex3 = fisher_dataset_exhaustive(d3);
  CHECK(!row_significant(ex3, 0 * 4 + 3));
}

TEST_CASE("fisher labels match the exact enumeration") {
  for (int n : {10, 25}) {
    FisherDesign d;
    d.n = n;
    const Dataset ex = fisher_dataset_exhaustive(d);
    const std::size_t side = static_cast<std::size_t>(n) + 1;
    REQUIRE(ex.rows == side * side);
    CHECK(ex.task == Task::classification);
    CHECK(ex.feature_names == std::vector<std::string>{"q1", "q2", "n"});
    CHECK(ex.target_names == std::vector<std::string>{"y0", "y1"});

    for (std::size_t i = 0; i < ex.rows; ++i) {
      const int q1 = static_cast<int>(i / side);
      const int q2 = static_cast<int>(i % side);
      CHECK(ex.features[i * 3 + 0] == static_cast<double>(q1));
      CHECK(ex.features[i * 3 + 1] == static_cast<double>(q2));
      CHECK(ex.features[i * 3 + 2] == static_cast<double>(n));
      CHECK(row_significant(ex, i) == oracle_significant(q1, q2, n));
    }

    // No table may be significant in both directions at a level below 1/2.
    for (std::size_t i = 0; i < ex.rows; ++i) {
      if (!row_significant(ex, i)) continue;
      const std::size_t q1 = i / side;
      const std::size_t q2 = i % side;
      CHECK(!row_significant(ex, q2 * side + q1));
    }
  }
}

TEST_CASE("fisher random sampling is uniform over the grid and deterministic") {
  FisherDesign d;
  const Dataset data = fisher_dataset(400, d, 5);
  CHECK(data.rows == 400);
  CHECK(data.task == Task::classification);

  std::set<std::pair<int, int>> cells;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const double q1 = data.features[i * 3 + 0];
    const double q2 = data.features[i * 3 + 1];
    CHECK(data.features[i * 3 + 2] == 25.0);
    CHECK(q1 == std::floor(q1));
    CHECK(q2 == std::floor(q2));
    CHECK(q1 >= 0.0);
    CHECK(q1 <= 25.0);
    CHECK(q2 >= 0.0);
    CHECK(q2 <= 25.0);
    cells.emplace(static_cast<int>(q1), static_cast<int>(q2));
    const double p = statcore::fisher_exact_one_sided_greater(
        static_cast<int>(q1), static_cast<int>(q2), 25);
    CHECK(row_significant(data, i) == (p < d.alpha_level));
  }
  CHECK(cells.size() >= 200);  // 400 uniform draws over 676 cells

  const Dataset again = fisher_dataset(400, d, 5);
  CHECK(again.features == data.features);
  CHECK(again.targets == data.targets);
  const Dataset other = fisher_dataset(400, d, 6);
  CHECK(other.features != data.features);

  CHECK_THROWS_AS(fisher_dataset(0, d, 1), config_error);
  FisherDesign bad;
  bad.n = 0;
  CHECK_THROWS_AS(fisher_dataset(3, bad, 1), config_error);
  bad = d;
  bad.alpha_level = 1.0;
  CHECK_THROWS_AS(fisher_dataset_exhaustive(bad), config_error);
}
