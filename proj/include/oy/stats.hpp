#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "oy/rng.hpp"

namespace oy {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

// Standard error of the mean by batch means over contiguous batches
// (32 when the sample allows, never fewer than the sample itself).
inline double batch_means_stderr(const std::vector<double>& v, int batches = 32) {
  const int n = int(v.size());
  if (n < 2) throw std::invalid_argument("batch_means_stderr: need at least two values");
  const int B = std::min(batches, n);
  std::vector<double> bm(B, 0.0);
  std::vector<int> cnt(B, 0);
  for (int i = 0; i < n; ++i) {
    const int b = int(std::int64_t(i) * B / n);
    bm[b] += v[i];
    ++cnt[b];
  }
  for (int b = 0; b < B; ++b) bm[b] /= double(cnt[b]);
  const double mb = mean_of(bm);
  double s = 0.0;
  for (double x : bm) s += (x - mb) * (x - mb);
  return std::sqrt(s / double(B - 1) / double(B));
}

// Delete-one jackknife standard error of the sample variance, in closed form
// from the power sums.
inline double jackknife_variance_stderr(const std::vector<double>& v) {
  const int n = int(v.size());
  if (n < 3) throw std::invalid_argument("jackknife needs n >= 3");
  double s1 = 0.0, s2 = 0.0;
  for (double x : v) {
    s1 += x;
    s2 += x * x;
  }
  double mean_loo = 0.0;
  std::vector<double> loo(n);
  for (int i = 0; i < n; ++i) {
    const double s1i = s1 - v[i], s2i = s2 - v[i] * v[i];
    loo[i] = (s2i - s1i * s1i / (n - 1)) / (n - 2);
    mean_loo += loo[i];
  }
  mean_loo /= n;
  double acc = 0.0;
  for (double x : loo) acc += (x - mean_loo) * (x - mean_loo);
  return std::sqrt(acc * double(n - 1) / double(n));
}

struct EstimateReport {
  double estimate = 0.0;
  double stderr_ = 0.0;
  int replicas = 0;
  double ci_lo = 0.0, ci_hi = 0.0;
  double raw_mean = 0.0, raw_m2 = 0.0;  // raw-moment sidecar

  static EstimateReport of_mean(const std::vector<double>& v) {
    EstimateReport r;
    r.replicas = int(v.size());
    r.estimate = mean_of(v);
    r.stderr_ = batch_means_stderr(v);
    r.ci_lo = r.estimate - 1.959963984540054 * r.stderr_;
    r.ci_hi = r.estimate + 1.959963984540054 * r.stderr_;
    r.raw_mean = r.estimate;
    double m2 = 0.0;
    for (double x : v) m2 += x * x;
    r.raw_m2 = m2 / double(v.size());
    return r;
  }

  static EstimateReport of_variance(const std::vector<double>& v) {
    EstimateReport r;
    r.replicas = int(v.size());
    r.estimate = sample_variance(v);
    r.stderr_ = jackknife_variance_stderr(v);
    r.ci_lo = r.estimate - 1.959963984540054 * r.stderr_;
    r.ci_hi = r.estimate + 1.959963984540054 * r.stderr_;
    r.raw_mean = mean_of(v);
    double m2 = 0.0;
    for (double x : v) m2 += x * x;
    r.raw_m2 = m2 / double(v.size());
    return r;
  }
};

// Kolmogorov asymptotic survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline KsResult two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("two_sample_ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

namespace detail {
// Marsaglia & Marsaglia evaluation of the asymptotic Anderson-Darling CDF
// plus the finite-n correction.
inline double ad_inf(double z) {
  if (z < 0.01) return 0.0;
  if (z < 2.0)
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z);
  return std::exp(-std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z));
}

inline double ad_errfix(int n, double x) {
  if (x > 0.8)
    return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
  const double c = 0.01265 + 0.1757 / n;
  if (x < c) {
    double t = x / c;
    t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
    return t * (0.0037 / (double(n) * n) + 0.00078 / n + 0.00006) / n;
  }
  double t = (x - c) / (0.8 - c);
  t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
  return t * (0.04213 + 0.01365 / n) / n;
}
}  // namespace detail

struct AdResult {
  double a2 = 0.0;
  double p_value = 1.0;
};

// Anderson-Darling test of a sample against the standard normal (fully
// specified null).
inline AdResult anderson_darling_normal(std::vector<double> z) {
  const int n = int(z.size());
  if (n < 8) throw std::invalid_argument("anderson_darling_normal: sample too small");
  std::sort(z.begin(), z.end());
  double a2 = -double(n);
  for (int i = 0; i < n; ++i) {
    const double lo = std::max(normal_cdf(z[i]), 1e-300);
    const double hi = std::max(1.0 - normal_cdf(z[n - 1 - i]), 1e-300);
    a2 -= (2.0 * i + 1.0) / n * (std::log(lo) + std::log(hi));
  }
  AdResult r;
  r.a2 = a2;
  const double cdf = std::clamp(detail::ad_inf(a2) + detail::ad_errfix(n, detail::ad_inf(a2)), 0.0, 1.0);
  r.p_value = 1.0 - cdf;
  return r;
}

struct WlsFit {
  double slope = 0.0, intercept = 0.0;
  double se_slope = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
};

// Weighted least squares y = a + s x with weights w = 1/se^2.
inline WlsFit weighted_least_squares(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 3)
    throw std::invalid_argument("weighted_least_squares: need >= 3 matched points");
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  WlsFit f;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  f.se_slope = std::sqrt(1.0 / sxx);
  f.ci_lo = f.slope - 1.959963984540054 * f.se_slope;
  f.ci_hi = f.slope + 1.959963984540054 * f.se_slope;
  return f;
}

}  // namespace oy
