#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oy {

// Smooth compactly supported bump: amplitude * exp(-1/(1-y^2)) on |y| < 1,
// y = (x - center)/width.
struct BumpDescriptor {
  double center = 0.0;
  double width = 1.0;
  double amplitude = 1.0;
};

// Closed-form potential family. Closed forms give exact derivatives up to
// order three, which the stiff tangent systems need.
struct PotentialSpec {
  enum class Variant { exponential, laplace_measure, quadratic, perturbed };

  Variant variant = Variant::exponential;
  double beta = 1.0;
  std::vector<std::pair<double, double>> atoms;  // (s_i, w_i), s_i > 0, w_i > 0
  std::shared_ptr<const PotentialSpec> base;     // perturbed only
  BumpDescriptor bump;
  double epsilon = 0.0;

  static PotentialSpec exponential(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("exponential potential needs beta > 0");
    PotentialSpec s;
    s.variant = Variant::exponential;
    s.beta = beta;
    return s;
  }

  static PotentialSpec laplace_measure(std::vector<std::pair<double, double>> atoms) {
    if (atoms.empty()) throw std::invalid_argument("laplace_measure needs at least one atom");
    for (const auto& [si, wi] : atoms)
      if (!(si > 0.0) || !(wi > 0.0))
        throw std::invalid_argument("laplace_measure atoms need s_i > 0, w_i > 0");
    PotentialSpec s;
    s.variant = Variant::laplace_measure;
    s.atoms = std::move(atoms);
    return s;
  }

  static PotentialSpec quadratic() {
    PotentialSpec s;
    s.variant = Variant::quadratic;
    return s;
  }

  static PotentialSpec perturbed(PotentialSpec base_spec, BumpDescriptor b, double eps) {
    if (base_spec.variant == Variant::perturbed)
      throw std::invalid_argument("perturbed potential cannot nest");
    if (!(b.width > 0.0)) throw std::invalid_argument("bump width must be positive");
    PotentialSpec s;
    s.variant = Variant::perturbed;
    s.base = std::make_shared<PotentialSpec>(std::move(base_spec));
    s.bump = b;
    s.epsilon = eps;
    return s;
  }

  bool is_quadratic() const { return variant == Variant::quadratic; }

  std::string name() const {
    switch (variant) {
      case Variant::exponential: return "exponential(beta=" + std::to_string(beta) + ")";
      case Variant::laplace_measure: return "laplace_measure[" + std::to_string(atoms.size()) + "]";
      case Variant::quadratic: return "quadratic";
      case Variant::perturbed: return "perturbed(" + base->name() + ")";
    }
    return "?";
  }
};

namespace detail {

// Derivatives of exp(-1/(1-y^2)) in y, zero outside |y| < 1.
inline void bump_profile_derivs(double y, double out[4]) {
  if (!(std::fabs(y) < 1.0)) {
    out[0] = out[1] = out[2] = out[3] = 0.0;
    return;
  }
  const double u = 1.0 - y * y;
  const double up = -2.0 * y;
  const double upp = -2.0;
  const double s = std::exp(-1.0 / u);
  const double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  const double g1 = up / u2;
  const double g2 = upp / u2 - 2.0 * up * up / u3;
  const double g3 = -6.0 * up * upp / u3 + 6.0 * up * up * up / u4;
  out[0] = s;
  out[1] = s * g1;
  out[2] = s * (g2 + g1 * g1);
  out[3] = s * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1);
}

inline double bump_deriv(const BumpDescriptor& b, double x, int order) {
  double d[4];
  bump_profile_derivs((x - b.center) / b.width, d);
  return b.amplitude * d[order] / std::pow(b.width, order);
}

}  // namespace detail

// V and its first three derivatives, exact per variant. Overflowing
// exponentials return +/-inf; use log_abs_eval below that threshold.
inline double eval(const PotentialSpec& spec, double x, int order) {
  if (order < 0 || order > 3) throw std::invalid_argument("potential eval: order must be in 0..3");
  if (!std::isfinite(x)) throw std::invalid_argument("potential eval: non-finite x");
  switch (spec.variant) {
    case PotentialSpec::Variant::exponential: {
      const double mag = std::exp(-spec.beta * x) * std::pow(spec.beta, order);
      return (order % 2 == 0) ? mag : -mag;
    }
    case PotentialSpec::Variant::laplace_measure: {
      double mag = 0.0;
      for (const auto& [s, w] : spec.atoms) mag += w * std::pow(s, order) * std::exp(-s * x);
      return (order % 2 == 0) ? mag : -mag;
    }
    case PotentialSpec::Variant::quadratic:
      switch (order) {
        case 0: return 0.5 * x * x;
        case 1: return x;
        case 2: return 1.0;
        default: return 0.0;
      }
    case PotentialSpec::Variant::perturbed:
      return eval(*spec.base, x, order) + spec.epsilon * detail::bump_deriv(spec.bump, x, order);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// log |V^(order)(x)|; finite even where eval overflows. Exponential-type
// variants only (the quadratic case never overflows).
inline double log_abs_eval(const PotentialSpec& spec, double x, int order) {
  if (order < 0 || order > 3) throw std::invalid_argument("potential log_abs_eval: bad order");
  switch (spec.variant) {
    case PotentialSpec::Variant::exponential:
      return order * std::log(spec.beta) - spec.beta * x;
    case PotentialSpec::Variant::laplace_measure: {
      double m = -std::numeric_limits<double>::infinity();
      for (const auto& [s, w] : spec.atoms)
        m = std::max(m, std::log(w) + order * std::log(s) - s * x);
      double acc = 0.0;
      for (const auto& [s, w] : spec.atoms)
        acc += std::exp(std::log(w) + order * std::log(s) - s * x - m);
      return m + std::log(acc);
    }
    case PotentialSpec::Variant::quadratic: {
      const double v = eval(spec, x, order);
      return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::fabs(v));
    }
    case PotentialSpec::Variant::perturbed: {
      const double v = eval(spec, x, order);
      if (std::isfinite(v))
        return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::fabs(v));
      return log_abs_eval(*spec.base, x, order);  // bump is compact, base dominates
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Grid-certified check of the defining conditions of the potential class:
// c0 V'' <= -V''' <= V''/c_upper + C 1_{x >= -C}, quadratic growth at -inf,
// V >= 0, V' <= 0. Constants are certified on the grid only.
struct OyTypeAudit {
  std::vector<double> grid;
  double c_lower = 0.0;    // largest c0 with c0 V'' <= -V''' on the grid
  double c_upper = 0.0;    // denominator constant of the upper inequality
  double C_ind = 0.0;      // cutoff/bump constant of the upper inequality
  double certified_c0 = 0.0;  // min(c_lower, c_upper): safe for 0 < a <= c0 uses
  double growth_coeff = 0.0;  // min V(x)/x^2 over x <= -max(C_ind, 1)
  bool growth_ok = false;
  bool pass = false;
  std::string reason;
};

inline OyTypeAudit audit_oy_type(const PotentialSpec& spec, double x_min = -30.0,
                                 double x_max = 30.0, int n_grid = 4096) {
  if (!(x_min < x_max)) throw std::invalid_argument("audit_oy_type: x_min < x_max required");
  if (n_grid < 16) throw std::invalid_argument("audit_oy_type: n_grid >= 16 required");

  OyTypeAudit audit;
  audit.grid.resize(n_grid);
  if (spec.is_quadratic()) {
    // The Gaussian exception: V''' == 0 admits no positive c0.
    for (int i = 0; i < n_grid; ++i)
      audit.grid[i] = x_min + (x_max - x_min) * double(i) / double(n_grid - 1);
    audit.reason = "V'''==0 violates c0 V'' <= -V'''";
    return audit;
  }
  std::vector<double> v0(n_grid), v1(n_grid), v2(n_grid), v3(n_grid);
  for (int i = 0; i < n_grid; ++i) {
    const double x = x_min + (x_max - x_min) * double(i) / double(n_grid - 1);
    audit.grid[i] = x;
    v0[i] = eval(spec, x, 0);
    v1[i] = eval(spec, x, 1);
    v2[i] = eval(spec, x, 2);
    v3[i] = eval(spec, x, 3);
  }

  bool base_ok = true;
  for (int i = 0; i < n_grid && base_ok; ++i) {
    if (!(v0[i] >= 0.0)) { base_ok = false; audit.reason = "V < 0 on grid"; }
    else if (!(v1[i] <= 0.0)) { base_ok = false; audit.reason = "V' > 0 on grid"; }
    else if (!(v2[i] >= 0.0)) { base_ok = false; audit.reason = "V'' < 0 on grid"; }
  }

  // Lower inequality: c_lower = min(-V'''/V'').
  double c_lower = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_grid; ++i) {
    if (v2[i] > 0.0 && std::isfinite(v2[i]) && std::isfinite(v3[i]))
      c_lower = std::min(c_lower, -v3[i] / v2[i]);
    else if (std::isinf(v2[i]))
      continue;  // overflow region: ratio certified by the finite part of the grid
  }
  if (!std::isfinite(c_lower)) c_lower = 0.0;
  audit.c_lower = std::max(0.0, c_lower);

  if (audit.c_lower <= 0.0) {
    audit.pass = false;
    if (audit.reason.empty()) audit.reason = "V'''==0 violates c0 V'' <= -V'''";
    return audit;
  }

  // Upper inequality: pick the cutoff C so that the far-field ratio is
  // certified; the bump height then enlarges C to the paper's single constant.
  double C = 1.0;
  double kappa = 0.0;
  for (int iter = 0; iter < 8; ++iter) {
    kappa = 0.0;
    for (int i = 0; i < n_grid; ++i)
      if (audit.grid[i] < -C && v2[i] > 0.0 && std::isfinite(v2[i]) && std::isfinite(v3[i]))
        kappa = std::max(kappa, -v3[i] / v2[i]);
    const double coeff = std::max(kappa, audit.c_lower > 0 ? 1.0 / audit.c_lower : kappa);
    double height = 0.0;
    for (int i = 0; i < n_grid; ++i)
      if (audit.grid[i] >= -C && std::isfinite(v2[i]) && std::isfinite(v3[i]))
        height = std::max(height, -v3[i] - coeff * v2[i]);
    const double next = std::max(C, height);
    if (next == C) break;
    C = next;
  }
  audit.C_ind = C;
  audit.c_upper = kappa > 0.0 ? 1.0 / kappa : audit.c_lower;
  audit.certified_c0 = std::min(audit.c_lower, audit.c_upper);

  // Quadratic growth for x <= -max(C, 1).
  const double cut = -std::max(C, 1.0);
  double growth = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < n_grid; ++i) {
    const double x = audit.grid[i];
    if (x <= cut) {
      any = true;
      growth = std::min(growth, std::isinf(v0[i]) ? growth : v0[i] / (x * x));
    }
  }
  audit.growth_coeff = any && std::isfinite(growth) ? growth : 0.0;
  audit.growth_ok = any && audit.growth_coeff > 0.0;
  if (!audit.growth_ok && audit.reason.empty()) audit.reason = "no quadratic growth certified at -inf";

  audit.pass = base_ok && audit.c_lower > 0.0 && audit.certified_c0 > 0.0 && audit.growth_ok;
  if (audit.pass) audit.reason.clear();
  return audit;
}

}  // namespace oy
