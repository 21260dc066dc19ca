#include "layerfit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "layerfit/casestudies.hpp"
#include "layerfit/modelselect.hpp"
#include "layerfit/parallel.hpp"
#include "layerfit/rng.hpp"
#include "layerfit/statcore.hpp"

namespace layerfit::verify {

namespace {

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

__int128 choose_exact(int m, int r) {
  if (r < 0 || r > m) return 0;
  __int128 v = 1;
  for (int i = 1; i <= r; ++i) v = v * (m - r + i) / i;
  return v;
}

}  // namespace

CheckResult check_cp_identity(int tuples, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < tuples; ++t) {
    const int n = rng.uniform_int(20, 5000);
    const int p = rng.uniform_int(1, 50);
    const double sigma2 = rng.uniform(1e-4, 10.0);
    const double sse = rng.uniform(1e-4, 10.0) * n;
    const double cp = modelselect::mallows_cp(sse, sigma2, n, p);
    const double mc = modelselect::mc_statistic(sse / n, sigma2, 2.0 / n, p);
    const double rel =
        std::abs(n * mc - cp) / std::max(1.0, std::abs(cp));
    worst = std::max(worst, rel);
  }
  CheckResult res;
  res.name = "cp-identity";
  res.passed = worst <= 1e-10;
  res.detail = fmt("worst relative gap %.3g over %.0f tuples",
                   worst, static_cast<double>(tuples));
  return res;
}

CheckResult check_fisher_enumeration(int max_n) {
  double worst_rel = 0.0;
  long long label_mismatches = 0;
  long long cells = 0;
  for (int n = 1; n <= max_n; ++n) {
    for (int q1 = 0; q1 <= n; ++q1) {
      for (int q2 = 0; q2 <= n; ++q2) {
        const int q = q1 + q2;
        __int128 num = 0;
        for (int x = q2; x <= std::min(q, n); ++x)
          if (q - x >= 0 && q - x <= n)
            num += choose_exact(n, x) * choose_exact(n, q - x);
        const __int128 den = choose_exact(2 * n, q);
        const double exact = static_cast<double>(
            static_cast<long double>(num) / static_cast<long double>(den));
        const double p = statcore::fisher_exact_one_sided_greater(q1, q2, n);
        worst_rel = std::max(worst_rel, std::abs(p - exact) / exact);
        // Exact label: 20 * num < den is p < 1/20 without any rounding.
        const bool exact_sig = 20 * num < den;
        if ((p < 0.05) != exact_sig) ++label_mismatches;
        ++cells;
      }
    }
  }
  CheckResult res;
  res.name = "fisher-enumeration";
  res.passed = worst_rel <= 1e-12 && label_mismatches == 0;
  res.detail = fmt("worst relative error %.3g, %.0f label mismatches",
                   worst_rel, static_cast<double>(label_mismatches)) +
               fmt(" over %.0f tables", static_cast<double>(cells), 0.0);
  return res;
}

CheckResult check_gng_mc(int designs, int reps, std::uint64_t seed) {
  std::vector<casestudies::GngDesign> ds(static_cast<std::size_t>(designs));
  Rng rng(seed);
  for (casestudies::GngDesign& d : ds) {
    d.n = rng.uniform_int(10, 60);
    d.q_a = rng.uniform(0.5, 3.0);
    d.q_b = rng.uniform(0.5, 3.0);
    d.t_min = rng.uniform(0.05, 0.4);
    d.t_base = std::min(1.0, d.t_min + rng.uniform(0.02, 0.3));
    d.tau_min = rng.uniform(0.5, 0.95);
    d.tau_base = rng.uniform(0.05, 0.5);
    d.q0 = rng.uniform(0.05, 0.7);
  }
  std::vector<double> dev(ds.size()), band(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    const casestudies::GngDesign& d = ds[i];
    // Decision per responder count, evaluated once.
    std::vector<char> go(static_cast<std::size_t>(d.n) + 1);
    for (int nr = 0; nr <= d.n; ++nr) {
      const double a = d.q_a + nr;
      const double b = d.q_b + (d.n - nr);
      go[static_cast<std::size_t>(nr)] =
          statcore::beta_tail(d.t_min, a, b) > d.tau_min &&
          statcore::beta_tail(d.t_base, a, b) > d.tau_base;
    }
    const double exact = casestudies::gng_expected_go(d);
    // Responder counts as raw Bernoulli sums: no binomial pmf involved.
    Rng r(derive_seed(seed, i, 1));
    long long hits = 0;
    for (int rep = 0; rep < reps; ++rep) {
      int nr = 0;
      for (int s = 0; s < d.n; ++s) nr += r.uniform() < d.q0 ? 1 : 0;
      hits += go[static_cast<std::size_t>(nr)];
    }
    const double phat = static_cast<double>(hits) / reps;
    // Band from the binomial SD at the exact probability: the empirical rate
    // collapses to zero variance when no rep hits, the true spread does not.
    const double se = std::sqrt(exact * (1.0 - exact) / reps);
    dev[i] = std::abs(phat - exact);
    band[i] = 3.0 * se + 1e-9;
  });
  double worst_ratio = 0.0;
  bool all = true;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    worst_ratio = std::max(worst_ratio, dev[i] / band[i]);
    all = all && dev[i] <= band[i];
  }
  CheckResult res;
  res.name = "gng-mc";
  res.passed = all;
  res.detail = fmt("worst deviation %.3g of the 3 SE band over %.0f designs",
                   worst_ratio, static_cast<double>(designs)) +
               fmt(" (%.0f reps each)", static_cast<double>(reps), 0.0);
  return res;
}

CheckResult check_trial_null(int reps, std::uint64_t seed) {
  const double alphas[] = {0.025, 0.05, 0.1};
  double worst_ratio = 0.0;
  bool all = true;
  for (std::size_t i = 0; i < 3; ++i) {
    casestudies::TrialDesign d;
    d.mu0 = 0.0;
    d.alpha = alphas[i];
    d.mc_reps = reps;
    const double rate = casestudies::trial_power(d, derive_seed(seed, i));
    const double band =
        3.0 * std::sqrt(alphas[i] * (1.0 - alphas[i]) / reps);
    const double dev = std::abs(rate - alphas[i]);
    worst_ratio = std::max(worst_ratio, dev / band);
    all = all && dev <= band;
  }
  CheckResult res;
  res.name = "trial-null";
  res.passed = all;
  res.detail = fmt("worst deviation %.3g of the 3 SE band (%.0f reps)",
                   worst_ratio, static_cast<double>(reps));
  return res;
}

std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> out;
  out.push_back(check_cp_identity(1000, 20250821));
  out.push_back(check_fisher_enumeration(25));
  out.push_back(check_gng_mc(20, 1000000, 20250822));
  out.push_back(check_trial_null(100000, 20260401));
  return out;
}

}  // namespace layerfit::verify
