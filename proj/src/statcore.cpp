#include "layerfit/statcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace layerfit::statcore {
namespace {

// Acklam's rational approximation to the normal quantile, refined below with
// one Newton step so the result is accurate to near machine precision.
double acklam_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
            a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
           c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Continued fraction for the regularized incomplete beta (Lentz's method).
// Converges quickly for x < (a+1)/(a+b+2); the caller applies the symmetry
// transform otherwise.
double beta_cf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

// Average ranks with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> v) {
  const size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](size_t i, size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  double z = acklam_quantile(p);
  // One Newton refinement: z -= (Phi(z) - p) / phi(z).
  const double e = normal_cdf(z) - p;
  const double pdf =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  if (pdf > 0.0) z -= e / pdf;
  return z;
}

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("reg_inc_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("reg_inc_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_sf: df must be positive");
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * reg_inc_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

double beta_tail(double threshold, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("beta_tail: a and b must be positive");
  const double x = std::clamp(threshold, 0.0, 1.0);
  return 1.0 - reg_inc_beta(a, b, x);
}

double binom_pmf(int k, int n, double p) {
  if (n < 0 || k < 0 || k > n)
    throw std::domain_error("binom_pmf: require 0 <= k <= n");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("binom_pmf: p must lie in [0, 1]");
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  const double ln_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                           std::lgamma(n - k + 1.0);
  return std::exp(ln_choose + k * std::log(p) + (n - k) * std::log1p(-p));
}

double fisher_exact_one_sided_greater(int q1, int q2, int n) {
  if (n <= 0) throw std::domain_error("fisher_exact: n must be positive");
  if (q1 < 0 || q1 > n || q2 < 0 || q2 > n)
    throw std::domain_error("fisher_exact: counts must lie in [0, n]");
  // Margins: both groups have n subjects; q1 + q2 total responses. The table
  // cell for group 2 ranges over [max(0, q-n), min(q, n)] with q = q1 + q2.
  const int q = q1 + q2;
  const int lo = std::max(0, q - n);
  const int hi = std::min(q, n);
  if (q2 <= lo) return 1.0;  // tail covers the entire support
  // Up to n = 28 every binomial coefficient involved stays below 2^53, so the
  // integer tail sum divided by C(2n, q) is the correctly rounded p-value.
  // That keeps decisions at a significance boundary (p landing exactly on the
  // level) faithful to the underlying rational number.
  if (n <= 28) {
    auto choose = [](int m, int r) {
      unsigned __int128 v = 1;
      for (int i = 1; i <= r; ++i)
        v = v * static_cast<unsigned>(m - r + i) / static_cast<unsigned>(i);
      return v;
    };
    unsigned __int128 num = 0;
    for (int x = q2; x <= hi; ++x) num += choose(n, x) * choose(n, q - x);
    return static_cast<double>(num) / static_cast<double>(choose(2 * n, q));
  }
  auto ln_choose = [](int m, int r) {
    return std::lgamma(m + 1.0) - std::lgamma(r + 1.0) -
           std::lgamma(m - r + 1.0);
  };
  const double ln_denom = ln_choose(2 * n, q);
  double total = 0.0;
  for (int x = q2; x <= hi; ++x) {
    total += std::exp(ln_choose(n, x) + ln_choose(n, q - x) - ln_denom);
  }
  return std::min(total, 1.0);
}

std::optional<double> pearson_correlation(std::span<const double> a,
                                          std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("pearson_correlation: length mismatch");
  if (a.size() < 2)
    throw std::invalid_argument("pearson_correlation: need at least 2 points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> spearman_correlation(std::span<const double> a,
                                           std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("spearman_correlation: length mismatch");
  if (a.size() < 2)
    throw std::invalid_argument("spearman_correlation: need at least 2 points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_correlation(ra, rb);
}

}  // namespace layerfit::statcore
