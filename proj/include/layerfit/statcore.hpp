#pragma once

#include <optional>
#include <span>

namespace layerfit::statcore {

// Standard normal CDF. Monotone, Phi(0) = 0.5, Phi(-z) + Phi(z) = 1.
double normal_cdf(double z);

// Inverse of normal_cdf on (0, 1); accurate to well below 1e-9.
// Throws std::domain_error outside the open interval.
double normal_quantile(double p);

// Upper-tail probability P(T >= t) of Student's t with df > 0 degrees of
// freedom. Throws std::domain_error for df <= 0.
double student_t_sf(double t, double df);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation with
// the symmetry switch at x > (a+1)/(a+b+2).
double reg_inc_beta(double a, double b, double x);

// P(q >= threshold) for q ~ Beta(a, b), i.e. 1 - I_threshold(a, b).
// Throws std::domain_error for nonpositive a or b.
double beta_tail(double threshold, double a, double b);

// C(n,k) p^k (1-p)^(n-k) via log-gamma. Throws std::domain_error when k is
// out of [0, n].
double binom_pmf(int k, int n, double p);

// One-sided p-value P(X >= q2) under the hypergeometric distribution with
// fixed margins (row totals n, n; column totals q1+q2, 2n-q1-q2); tests
// whether the odds ratio of group 2 versus group 1 exceeds 1.
double fisher_exact_one_sided_greater(int q1, int q2, int n);

// Pearson r in [-1, 1]. Lengths must match and be >= 2 (std::invalid_argument
// otherwise). Zero variance in either vector yields nullopt: the correlation
// is undefined and the caller treats the candidate as invalid.
std::optional<double> pearson_correlation(std::span<const double> a,
                                          std::span<const double> b);

// Spearman rank correlation (average ranks on ties), same contract.
std::optional<double> spearman_correlation(std::span<const double> a,
                                           std::span<const double> b);

}  // namespace layerfit::statcore
