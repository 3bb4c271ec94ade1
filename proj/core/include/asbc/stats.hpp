#pragma once

#include <functional>
#include <vector>

namespace asbc {

// Linear-interpolated quantile of a sorted sample (R type-7), q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

// Percentile of an unsorted sample (copies and sorts), pct in [0, 100].
double percentile(std::vector<double> values, double pct);

double normal_cdf(double z);

// Regularized upper incomplete gamma Q(a, x) by series / continued fraction.
double regularized_gamma_q(double a, double x);

// Survival function of the chi-square distribution.
double chi_square_sf(double stat, int dof);

// Chi-square goodness-of-fit p-value against uniform bin expectations.
double chi_square_uniform_pvalue(const std::vector<int>& bin_counts);

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

struct RunningMeanVar {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  // Population variance (divide by n).
  double variance() const { return n > 0 ? m2 / static_cast<double>(n) : 0.0; }
};

}  // namespace asbc
