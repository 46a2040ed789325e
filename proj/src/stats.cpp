#include "taste/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taste/util.hpp"

namespace taste {

namespace {

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz algorithm (Numerical Recipes form).
double incbeta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = 1e-15;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    double m2 = 2.0 * m;
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
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  // Convergence is fastest below the mean; use the symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * incbeta_cf(a, b, x) / a;
  }
  return 1.0 - front * incbeta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student_t_two_sided_p: df must be > 0");
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  double p = incomplete_beta(df / 2.0, 0.5, x);
  return std::clamp(p, 0.0, 1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  size_t n = values.size();
  if (n < 2) return 0.0;
  double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

TestResult t_test_impl(std::span<const double> values, double mu0, const char* name) {
  int64_t n = static_cast<int64_t>(values.size());
  if (n < 2) throw StatError(std::string(name) + ": need at least 2 observations");
  std::vector<double> shifted(values.begin(), values.end());
  for (double& v : shifted) v -= mu0;
  double m = mean(shifted);
  double sd = sample_sd(shifted);
  if (sd <= 0.0) throw StatError(std::string(name) + ": degenerate sample (zero variance)");
  double t = m / (sd / std::sqrt(static_cast<double>(n)));
  TestResult r;
  r.name = name;
  r.statistic = t;
  r.p_value = student_t_two_sided_p(t, static_cast<double>(n - 1));
  r.n = n;
  r.direction = sign_of(m);
  return r;
}

}  // namespace

TestResult paired_t_test(std::span<const double> differences) {
  return t_test_impl(differences, 0.0, "paired_t_test");
}

TestResult one_sample_t_test(std::span<const double> values, double mu0) {
  TestResult r = t_test_impl(values, mu0, "one_sample_t_test");
  return r;
}

std::vector<double> midranks(std::span<const double> pooled) {
  size_t n = pooled.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

bool has_ties(std::span<const double> pooled) {
  std::vector<double> sorted(pooled.begin(), pooled.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

// Exact null distribution of the rank sum of the first sample: the number of
// n1-subsets of ranks {1..n} with each possible sum, by dynamic programming.
// Equivalent to enumerating all rank assignments.
double exact_mw_two_sided_p(double u, int64_t n1, int64_t n2) {
  int64_t n = n1 + n2;
  int64_t max_sum = n1 * n - n1 * (n1 - 1) / 2;  // sum of the n1 largest ranks
  // ways[k][s] = subsets of size k with rank sum s; rolled over rank r.
  std::vector<std::vector<double>> ways(static_cast<size_t>(n1) + 1,
                                        std::vector<double>(static_cast<size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (int64_t r = 1; r <= n; ++r) {
    for (int64_t k = std::min(r, n1); k >= 1; --k) {
      for (int64_t s = max_sum; s >= r; --s) {
        ways[k][s] += ways[k - 1][s - r];
      }
    }
  }
  double total = 0.0;
  for (double w : ways[static_cast<size_t>(n1)]) total += w;
  // U = rank_sum - n1(n1+1)/2 ranges over [0, n1*n2]; two-sided p doubles the
  // smaller tail (distribution is symmetric around n1*n2/2).
  double u_low = std::min(u, static_cast<double>(n1 * n2) - u);
  double tail = 0.0;
  int64_t base = n1 * (n1 + 1) / 2;
  for (int64_t s = base; s <= max_sum; ++s) {
    if (static_cast<double>(s - base) <= u_low + 1e-9) tail += ways[static_cast<size_t>(n1)][static_cast<size_t>(s)];
  }
  return std::min(1.0, 2.0 * tail / total);
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y) {
  int64_t n1 = static_cast<int64_t>(x.size());
  int64_t n2 = static_cast<int64_t>(y.size());
  if (n1 == 0 || n2 == 0) throw StatError("mann_whitney_u: empty sample");
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<double> ranks = midranks(pooled);
  double rank_sum_x = std::accumulate(ranks.begin(), ranks.begin() + n1, 0.0);
  double u = rank_sum_x - static_cast<double>(n1 * (n1 + 1)) / 2.0;

  TestResult r;
  r.name = "mann_whitney_u";
  r.statistic = u;
  r.n = n1;
  r.n2 = n2;
  double u_mean = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  r.direction = sign_of(u - u_mean);

  bool tied = has_ties(pooled);
  if (!tied && n1 * n2 <= 400) {
    r.p_value = exact_mw_two_sided_p(u, n1, n2);
    r.notes = "exact";
    return r;
  }

  // Tie-corrected variance.
  double n = static_cast<double>(n1 + n2);
  double tie_term = 0.0;
  {
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    size_t i = 0;
    while (i < sorted.size()) {
      size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
               ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    // All values identical: no evidence either way.
    r.p_value = 1.0;
    r.notes = "all values tied";
    return r;
  }
  double diff = u - u_mean;
  // Continuity correction pulls |z| toward 0 by half a step.
  double cc = diff > 0.0 ? -0.5 : (diff < 0.0 ? 0.5 : 0.0);
  double z = (diff + cc) / std::sqrt(var);
  r.p_value = std::min(1.0, 2.0 * normal_cdf(-std::fabs(z)));
  r.notes = "normal approximation";
  return r;
}

std::pair<double, double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  int64_t n = static_cast<int64_t>(x.size());
  if (n < 3) throw StatError("pearson: need at least 3 points");
  double mx = mean(x);
  double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw StatError("pearson: constant input");
  double rho = sxy / std::sqrt(sxx * syy);
  rho = std::clamp(rho, -1.0, 1.0);
  double df = static_cast<double>(n - 2);
  double p;
  if (std::fabs(rho) >= 1.0) {
    p = 0.0;
  } else {
    double t = rho * std::sqrt(df / (1.0 - rho * rho));
    p = student_t_two_sided_p(t, df);
  }
  return {rho, p};
}

std::vector<double> zscores(std::span<const double> values, bool* degenerate) {
  if (values.size() < 2) throw std::invalid_argument("zscores: need at least 2 values");
  double m = mean(values);
  double sd = sample_sd(values);
  if (degenerate) *degenerate = false;
  if (sd <= 0.0) {
    if (degenerate) *degenerate = true;
    warn("zscores: constant input, returning zeros");
    return std::vector<double>(values.size(), 0.0);
  }
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - m) / sd;
  return out;
}

}  // namespace taste
