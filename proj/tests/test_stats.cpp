#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oy/stats.hpp"

using namespace oy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("mean, variance, batch means on synthetic data") {
  NoiseBlock nb(5, 0, 1.0, 1, 1);
  const int n = 20000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 3.0 + inverse_normal_cdf(nb.aux_uniform(i)) * 2.0;
  CHECK_THAT(mean_of(v), WithinAbs(3.0, 4.0 * 2.0 / std::sqrt(double(n))));
  CHECK_THAT(sample_variance(v), WithinRel(4.0, 0.1));
  const double se = batch_means_stderr(v);
  CHECK_THAT(se, WithinRel(2.0 / std::sqrt(double(n)), 0.5));
  auto rep = EstimateReport::of_mean(v);
  CHECK(rep.ci_lo < 3.0);
  CHECK(rep.ci_hi > 3.0);
}

TEST_CASE("jackknife se of the variance matches the asymptotic formula for normals") {
  NoiseBlock nb(9, 0, 1.0, 1, 1);
  const int n = 40000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = inverse_normal_cdf(nb.aux_uniform(i));
  const double se = jackknife_variance_stderr(v);
  // Var(s^2) ~ 2 sigma^4/(n-1) for Gaussians.
  CHECK_THAT(se, WithinRel(std::sqrt(2.0 / double(n - 1)), 0.15));
}

TEST_CASE("two-sample KS: same law accepted, shifted law rejected") {
  NoiseBlock nb(77, 0, 1.0, 1, 1);
  const int n = 4000;
  std::vector<double> a(n), b(n), c(n);
  for (int i = 0; i < n; ++i) {
    a[i] = inverse_normal_cdf(nb.aux_uniform(3 * i));
    b[i] = inverse_normal_cdf(nb.aux_uniform(3 * i + 1));
    c[i] = 0.25 + inverse_normal_cdf(nb.aux_uniform(3 * i + 2));
  }
  CHECK(two_sample_ks(a, b).p_value > 1e-3);
  CHECK(two_sample_ks(a, c).p_value < 1e-6);
}

TEST_CASE("anderson-darling: standard normal accepted, inflated scale rejected") {
  NoiseBlock nb(123, 0, 1.0, 1, 1);
  const int n = 10000;
  std::vector<double> z(n), s(n);
  for (int i = 0; i < n; ++i) {
    z[i] = inverse_normal_cdf(nb.aux_uniform(2 * i));
    s[i] = 1.12 * inverse_normal_cdf(nb.aux_uniform(2 * i + 1));
  }
  CHECK(anderson_darling_normal(z).p_value > 1e-3);
  CHECK(anderson_darling_normal(s).p_value < 1e-3);
}

TEST_CASE("anderson-darling p-values are calibrated at the 1e-3 tail") {
  // Critical value for A^2 at alpha ~ 1e-3 is ~6.0 (fully specified null).
  NoiseBlock nb(321, 0, 1.0, 1, 1);
  const int n = 500;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = inverse_normal_cdf(nb.aux_uniform(i));
  auto r = anderson_darling_normal(z);
  CHECK(r.a2 < 4.0);
  CHECK(r.p_value > 0.01);
}

TEST_CASE("weighted least squares recovers an exact power law") {
  std::vector<double> x, y, w;
  for (double n : {16.0, 32.0, 64.0, 128.0, 256.0}) {
    x.push_back(std::log(n));
    y.push_back(std::log(2.5) + (2.0 / 3.0) * std::log(n));
    w.push_back(1.0);
  }
  auto f = weighted_least_squares(x, y, w);
  CHECK_THAT(f.slope, WithinAbs(2.0 / 3.0, 1e-12));
  CHECK_THAT(f.intercept, WithinAbs(std::log(2.5), 1e-12));
  CHECK(f.ci_lo < f.slope);
  CHECK(f.ci_hi > f.slope);
}

TEST_CASE("kolmogorov tail function sanity") {
  CHECK_THAT(kolmogorov_q(0.5), WithinAbs(0.9639, 2e-3));
  CHECK_THAT(kolmogorov_q(1.36), WithinAbs(0.049, 2e-3));
  CHECK(kolmogorov_q(3.0) < 1e-7);
}
