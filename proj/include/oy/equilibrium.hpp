#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oy/errors.hpp"
#include "oy/potential.hpp"
#include "oy/rng.hpp"

namespace oy {

// Single-site invariant law nu_theta(x) = exp(-theta x - V(x)) / Z(theta),
// with log Z, the cumulant-type functions psi_k (k = -1..3), and cumulative
// tables for the CDF and its first two x-weighted companions. Immutable
// after build; safe for concurrent reads.
class EquilibriumMeasure {
 public:
  PotentialSpec spec;
  double theta = 1.0;
  double log_Z = 0.0;
  double mean = 0.0;  // first moment of nu_theta
  double x_lo = 0.0, x_hi = 0.0;
  double tail_tol = 1e-14, quad_tol = 1e-10, inv_tol = 1e-10;
  bool analytic_gaussian = false;

  // psi_k = d^{k+1}/dtheta^{k+1} log Z; index shifted by one.
  double psi(int k) const { return psi_.at(std::size_t(k + 1)); }

  double log_density(double x) const { return -theta * x - eval(spec, x, 0) - log_Z; }
  double density(double x) const { return std::exp(log_density(x)); }

  double cdf(double x) const;
  double m1_partial(double x) const;  // \int_{-inf}^x s nu(s) ds
  double m2_partial(double x) const;  // \int_{-inf}^x s^2 nu(s) ds

  std::array<double, 5> psi_{};  // k = -1..3 at slots 0..4

  // Chebyshev-clustered nodes with cumulative integrals of (1, s, s^2) nu.
  std::vector<double> nodes_, cdf_, g1_, g2_;

 private:
  template <typename F>
  double table_lookup(double x, const std::vector<double>& table, F&& weight) const;
};

namespace detail {

// Adaptive Gauss-Kronrod with the measure's relative tolerance.
template <typename F>
inline double integrate(F&& f, double a, double b, double rel_tol) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 15, rel_tol, &err);
  if (!(err <= std::max(rel_tol * std::fabs(v) * 10.0, 1e-280)))
    throw NumericError("quadrature did not reach the requested tolerance", err);
  return v;
}

// Location of the maximum of l(x) = -theta x - V(x): V'(x) = -theta.
inline double density_peak(const PotentialSpec& spec, double theta) {
  if (spec.is_quadratic()) return -theta;
  // g(x) = V'(x) + theta is nondecreasing, negative far left, -> theta > 0 right.
  double lo = 0.0, hi = 0.0;
  double step = 1.0;
  while (eval(spec, lo, 1) + theta > 0.0) { lo -= step; step *= 2.0; if (lo < -1e6) break; }
  step = 1.0;
  while (eval(spec, hi, 1) + theta < 0.0) { hi += step; step *= 2.0; if (hi > 1e6) break; }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eval(spec, mid, 1) + theta < 0.0) lo = mid; else hi = mid;
    if (hi - lo < 1e-13 * (1.0 + std::fabs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

struct Truncation {
  double x_lo, x_hi, peak_log;  // peak_log = max of l(x)
};

// Expand around the peak until both concave-majorant tail certificates fall
// below the tail tolerance. l is concave (l'' = -V''), so the tangent-line
// bound exp(l(end)) / |l'(end)| dominates each tail.
inline Truncation truncate_support(const PotentialSpec& spec, double theta, double tail_tol) {
  const double xs = density_peak(spec, theta);
  const auto l = [&](double x) { return -theta * x - eval(spec, x, 0); };
  const auto lp = [&](double x) { return -theta - eval(spec, x, 1); };
  const double M = l(xs);
  const double log_cut = std::log(tail_tol) - 8.0;

  double lo = xs - 1.0, hi = xs + 1.0, step = 1.0;
  for (int it = 0;; ++it) {
    if (it > 400) throw NumericError("support truncation failed to converge");
    const double slope = lp(lo);
    if (slope > 0.0 && l(lo) - M <= log_cut &&
        std::exp(l(lo) - M) / slope <= 0.01 * tail_tol) break;
    lo -= step;
    step *= 1.5;
  }
  step = 1.0;
  for (int it = 0;; ++it) {
    if (it > 400) throw NumericError("support truncation failed to converge");
    const double slope = -lp(hi);
    if (slope > 0.0 && l(hi) - M <= log_cut &&
        std::exp(l(hi) - M) / slope <= 0.01 * tail_tol) break;
    hi += step;
    step *= 1.5;
  }
  return {lo, hi, M};
}

constexpr int kCdfNodes = 4096;

// 7-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGL7x[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
                             0.0, 0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
constexpr double kGL7w[7] = {0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
                             0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
                             0.1294849661688697};

}  // namespace detail

// psi_k alone (no tables); one quadrature pass over the density for the mean
// and one for the central moments, sidestepping subtractive cancellation.
inline std::array<double, 5> compute_psis(const PotentialSpec& spec, double theta,
                                          double tail_tol = 1e-14, double quad_tol = 1e-10) {
  if (!(theta > 0.0)) throw std::invalid_argument("equilibrium: theta must be positive");
  if (spec.is_quadratic()) {
    const double log_z = 0.5 * std::log(2.0 * M_PI) + 0.5 * theta * theta;
    return {log_z, theta, 1.0, 0.0, 0.0};
  }
  const auto tr = detail::truncate_support(spec, theta, tail_tol);
  const auto g = [&](double x) { return std::exp(-theta * x - eval(spec, x, 0) - tr.peak_log); };
  const double I = detail::integrate(g, tr.x_lo, tr.x_hi, quad_tol);
  const double log_z = tr.peak_log + std::log(I);
  const double m = detail::integrate([&](double x) { return x * g(x); }, tr.x_lo, tr.x_hi,
                                     quad_tol) / I;
  const double mu2 = detail::integrate([&](double x) { const double d = x - m; return d * d * g(x); },
                                       tr.x_lo, tr.x_hi, quad_tol) / I;
  const double mu3 = detail::integrate([&](double x) { const double d = x - m; return d * d * d * g(x); },
                                       tr.x_lo, tr.x_hi, quad_tol) / I;
  const double mu4 = detail::integrate([&](double x) { const double d = x - m; const double d2 = d * d; return d2 * d2 * g(x); },
                                       tr.x_lo, tr.x_hi, quad_tol) / I;
  return {log_z, -m, mu2, -mu3, mu4 - 3.0 * mu2 * mu2};
}

inline EquilibriumMeasure build_equilibrium(const PotentialSpec& spec, double theta,
                                            double tail_tol = 1e-14, double quad_tol = 1e-10) {
  if (!(theta > 0.0)) throw std::invalid_argument("equilibrium: theta must be positive");
  if (!(tail_tol > 0.0 && tail_tol <= 1e-3) || !(quad_tol > 0.0 && quad_tol <= 1e-3))
    throw std::invalid_argument("equilibrium: tolerances must lie in (0, 1e-3]");

  EquilibriumMeasure m;
  m.spec = spec;
  m.theta = theta;
  m.tail_tol = tail_tol;
  m.quad_tol = quad_tol;
  m.psi_ = compute_psis(spec, theta, tail_tol, quad_tol);
  m.log_Z = m.psi_[0];
  m.mean = -m.psi_[1];

  if (spec.is_quadratic()) {
    // Unit-variance Gaussian centred at -theta: closed forms everywhere.
    m.analytic_gaussian = true;
    m.x_lo = -theta - 9.0;
    m.x_hi = -theta + 9.0;
    return m;
  }

  const auto tr = detail::truncate_support(spec, theta, tail_tol);
  m.x_lo = tr.x_lo;
  m.x_hi = tr.x_hi;

  // Cumulative tables over Chebyshev-clustered nodes; the three weights
  // (1, s, s^2) share every density evaluation.
  const int n = detail::kCdfNodes;
  m.nodes_.resize(n);
  m.cdf_.resize(n);
  m.g1_.resize(n);
  m.g2_.resize(n);
  const double mid = 0.5 * (tr.x_lo + tr.x_hi), half = 0.5 * (tr.x_hi - tr.x_lo);
  for (int i = 0; i < n; ++i)
    m.nodes_[i] = mid - half * std::cos(M_PI * double(i) / double(n - 1));
  m.nodes_.front() = tr.x_lo;
  m.nodes_.back() = tr.x_hi;

  const auto lg = [&](double x) { return -theta * x - eval(spec, x, 0) - tr.peak_log; };
  std::vector<double> c0(n, 0.0), c1(n, 0.0), c2(n, 0.0);
  for (int i = 1; i < n; ++i) {
    const double a = m.nodes_[i - 1], b = m.nodes_[i];
    const double hw = 0.5 * (b - a), cen = 0.5 * (a + b);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < 7; ++k) {
      const double x = cen + hw * detail::kGL7x[k];
      const double w = hw * detail::kGL7w[k] * std::exp(lg(x));
      s0 += w;
      s1 += w * x;
      s2 += w * x * x;
    }
    c0[i] = c0[i - 1] + s0;
    c1[i] = c1[i - 1] + s1;
    c2[i] = c2[i - 1] + s2;
  }

  // Tail certificates close the normalization so F(x_lo) <= tail_tol and
  // F(x_hi) >= 1 - tail_tol hold with the certified masses in place.
  const auto lp = [&](double x) { return -theta - eval(spec, x, 1); };
  const double left_tail = std::exp(lg(tr.x_lo)) / std::max(lp(tr.x_lo), 1e-300);
  const double right_tail = std::exp(lg(tr.x_hi)) / std::max(-lp(tr.x_hi), 1e-300);
  const double total = left_tail + c0[n - 1] + right_tail;

  // Cross-check the table normalization against the adaptive-quadrature Z.
  const double log_z_table = tr.peak_log + std::log(total);
  if (std::fabs(log_z_table - m.log_Z) > 1e3 * quad_tol)
    throw NumericError("cdf table normalization disagrees with log Z",
                       std::fabs(log_z_table - m.log_Z));

  for (int i = 0; i < n; ++i) {
    m.cdf_[i] = (left_tail + c0[i]) / total;
    m.g1_[i] = (c1[i] + left_tail * tr.x_lo) / total;
    m.g2_[i] = (c2[i] + left_tail * tr.x_lo * tr.x_lo) / total;
  }
  return m;
}

template <typename F>
double EquilibriumMeasure::table_lookup(double x, const std::vector<double>& table,
                                        F&& weight) const {
  if (x <= nodes_.front()) return table.front();
  if (x >= nodes_.back()) return table.back();
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  const std::size_t i = std::size_t(it - nodes_.begin()) - 1;
  const double a = nodes_[i];
  const double hw = 0.5 * (x - a), cen = 0.5 * (a + x);
  double s = 0.0;
  for (int k = 0; k < 7; ++k) {
    const double u = cen + hw * detail::kGL7x[k];
    s += hw * detail::kGL7w[k] * weight(u) * density(u);
  }
  return table[i] + s;
}

inline double EquilibriumMeasure::cdf(double x) const {
  if (analytic_gaussian) return normal_cdf(x + theta);
  return table_lookup(x, cdf_, [](double) { return 1.0; });
}

inline double EquilibriumMeasure::m1_partial(double x) const {
  if (analytic_gaussian) {
    const double a = x + theta;
    return -normal_pdf(a) - theta * normal_cdf(a);
  }
  return table_lookup(x, g1_, [](double u) { return u; });
}

inline double EquilibriumMeasure::m2_partial(double x) const {
  if (analytic_gaussian) {
    const double a = x + theta;
    const double phi = normal_pdf(a);
    return (normal_cdf(a) - a * phi) + 2.0 * theta * phi + theta * theta * normal_cdf(a);
  }
  return table_lookup(x, g2_, [](double u) { return u * u; });
}

// Inverse CDF: monotone bracket from the table, then safeguarded Newton on
// the analytic density.
inline double inverse_cdf(const EquilibriumMeasure& m, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("inverse_cdf: q outside (0,1)");
  if (m.analytic_gaussian) return -m.theta + inverse_normal_cdf(q);

  if (q <= m.cdf_.front()) return m.x_lo;  // |F - q| <= tail_tol << inv_tol
  if (q >= m.cdf_.back()) return m.x_hi;
  const auto it = std::upper_bound(m.cdf_.begin(), m.cdf_.end(), q);
  std::size_t i = std::size_t(it - m.cdf_.begin()) - 1;
  double lo = m.nodes_[i], hi = m.nodes_[i + 1];
  const double flo = m.cdf_[i], fhi = m.cdf_[i + 1];
  double x = lo + (hi - lo) * (q - flo) / std::max(fhi - flo, 1e-300);

  for (int iter = 0; iter < 100; ++iter) {
    const double f = m.cdf(x);
    if (std::fabs(f - q) <= m.inv_tol) return x;
    if (f > q) hi = x; else lo = x;
    const double dens = m.density(x);
    double next = x - (f - q) / std::max(dens, 1e-300);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  throw NumericError("inverse_cdf failed to converge", std::fabs(m.cdf(x) - q));
}

// d/deta and d^2/deta^2 of H_eta(q) = F_eta^{-1}(q) at eta = m.theta, via the
// implicit function theorem. The eta-derivatives of F come out as covariance
// integrals, all available from the cumulative tables:
//   d_eta F(u)   = -Cov(X, 1_{X<=u})
//   d_eta F'(u)  = (E X - u) nu(u)
//   d2_eta F(u)  = G2(u) - 2 m G1(u) + m^2 F(u) - F(u) Var(X).
inline double inverse_cdf_eta_derivative(const EquilibriumMeasure& m, double q, int order) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("inverse_cdf_eta_derivative: q outside (0,1)");
  if (order != 1 && order != 2)
    throw std::invalid_argument("inverse_cdf_eta_derivative: order must be 1 or 2");
  if (m.analytic_gaussian) return order == 1 ? -1.0 : 0.0;

  const double u = inverse_cdf(m, q);
  const double f = m.cdf(u);
  const double dens = std::max(m.density(u), 1e-300);
  const double g1 = m.m1_partial(u);
  const double deta_F = -(g1 - m.mean * f);  // = -Cov(X, 1_{X<=u}) >= 0
  const double h1 = -deta_F / dens;
  if (order == 1) return h1;

  const double g2 = m.m2_partial(u);
  const double fpp = -(m.theta + eval(m.spec, u, 1)) * dens;
  const double deta_Fp = (m.mean - u) * dens;
  const double d2eta_F = g2 - 2.0 * m.mean * g1 + m.mean * m.mean * f - f * m.psi(1);
  return -(d2eta_F + 2.0 * deta_Fp * h1 + fpp * h1 * h1) / dens;
}

inline double characteristic_time(const EquilibriumMeasure& m, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("characteristic_time: N >= 1 required");
  return double(N) * m.psi(1);
}

// Appendix-style nonpositivity scan of psi_2 over a theta grid. Violations
// are findings, not exceptions.
struct Psi2Point {
  double theta;
  double psi2;
  bool ok;
};

inline std::vector<Psi2Point> psi2_grid_check(const PotentialSpec& spec,
                                              const std::vector<double>& theta_grid,
                                              double quad_tol = 1e-10) {
  std::vector<Psi2Point> out;
  out.reserve(theta_grid.size());
  for (double th : theta_grid) {
    const auto psis = compute_psis(spec, th, 1e-14, quad_tol);
    out.push_back({th, psis[3], psis[3] <= quad_tol});
  }
  return out;
}

}  // namespace oy
