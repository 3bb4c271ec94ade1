#include "asbc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "asbc/errors.hpp"

namespace asbc {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) raise(ErrorCode::EmptyInput, "quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, pct / 100.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  // Lentz's continued fraction for Q(a, x), x > a + 1.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) raise(ErrorCode::DomainError, "regularized_gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi_square_sf(double stat, int dof) {
  if (dof < 1) raise(ErrorCode::DomainError, "chi_square_sf dof");
  if (stat <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * dof, 0.5 * stat);
}

double chi_square_uniform_pvalue(const std::vector<int>& bin_counts) {
  if (bin_counts.size() < 2) raise(ErrorCode::InsufficientData, "need >= 2 bins");
  long long total = 0;
  for (int c : bin_counts) total += c;
  if (total == 0) raise(ErrorCode::EmptyInput, "empty histogram");
  const double expected = static_cast<double>(total) / static_cast<double>(bin_counts.size());
  double stat = 0.0;
  for (int c : bin_counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return chi_square_sf(stat, static_cast<int>(bin_counts.size()) - 1);
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) raise(ErrorCode::EmptyInput, "ks_statistic empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace asbc
