#pragma once

// Self-contained statistical tests used by the experiment harness.
// Two-sided p-values throughout; direction is reported separately.

#include <span>
#include <string>
#include <vector>

namespace taste {

struct TestResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  int64_t n = 0;
  int64_t n2 = 0;       // second sample size where applicable
  int direction = 0;    // sign of the mean/median difference
  std::string notes;
};

// Regularized incomplete beta I_x(a, b); relative error <= 1e-10 over the
// tested domain (continued fraction with Lentz's method).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

double normal_cdf(double z);

// t = mean / (sd / sqrt(n)), df = n - 1. Throws StatError on n < 2 or zero
// variance ("degenerate sample").
TestResult paired_t_test(std::span<const double> differences);
TestResult one_sample_t_test(std::span<const double> values, double mu0 = 0.0);

// U from midranks (pairs where x beats y). Exact no-tie distribution when
// n1 * n2 <= 400 and the pooled sample is tie-free; otherwise normal
// approximation with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y);

// (rho, two-sided p) via t = rho * sqrt((n-2) / (1-rho^2)).
std::pair<double, double> pearson(std::span<const double> x, std::span<const double> y);

// (v - mean) / sample sd. A constant input yields all zeros; *degenerate is
// set when provided, and a warning is logged.
std::vector<double> zscores(std::span<const double> values, bool* degenerate = nullptr);

double mean(std::span<const double> values);
// Sample standard deviation (ddof = 1).
double sample_sd(std::span<const double> values);

// Midranks of the pooled vector (average rank across ties), 1-based.
std::vector<double> midranks(std::span<const double> pooled);

}  // namespace taste
