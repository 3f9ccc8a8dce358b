#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "oy/sensitivity.hpp"
#include "oy/stats.hpp"

namespace oy {

// Query against the random sub-probability measure on jump times in [0, t].
// Each query maps to F(s) = int_0^s f with piecewise-constant f >= 0;
// indicator queries use a unit impulse at the snapped threshold.
struct PsgQuery {
  enum class Kind { total_mass, tail_indicator, positive_part, integral_of };
  Kind kind = Kind::total_mass;
  double threshold = 0.0;  // tail t0 or positive-part offset
  Forcing custom;          // integral_of only

  static PsgQuery total_mass() { return {}; }
  static PsgQuery tail_indicator(double t0) {
    PsgQuery q;
    q.kind = Kind::tail_indicator;
    q.threshold = t0;
    return q;
  }
  static PsgQuery positive_part(double y) {
    PsgQuery q;
    q.kind = Kind::positive_part;
    q.threshold = y;
    return q;
  }
  static PsgQuery integral_of(Forcing f) {
    PsgQuery q;
    q.kind = Kind::integral_of;
    q.custom = std::move(f);
    return q;
  }

  const char* name() const {
    switch (kind) {
      case Kind::total_mass: return "total_mass";
      case Kind::tail_indicator: return "tail_indicator";
      case Kind::positive_part: return "positive_part";
      case Kind::integral_of: return "integral_of";
    }
    return "?";
  }
};

struct PsgEvaluation {
  double value = 0.0;
  enum class Method { ode, quadrature } method = Method::ode;
  double sup_F = 0.0;
  bool snapped = false;  // threshold was moved onto the grid
};

namespace detail {

struct QueryForcing {
  Forcing f;
  bool snapped = false;
};

inline QueryForcing query_forcing(const Trajectory& traj, const PsgQuery& q) {
  QueryForcing out;
  switch (q.kind) {
    case PsgQuery::Kind::total_mass:
      out.f = Forcing::impulse(0, 1.0);
      break;
    case PsgQuery::Kind::tail_indicator: {
      if (q.threshold < 0.0 || q.threshold > traj.time(traj.n_steps) * (1.0 + 1e-12))
        throw std::invalid_argument("tail threshold outside [0, t]");
      const std::int64_t m0 = traj.grid_index(q.threshold, /*snap=*/true);
      out.snapped = std::fabs(traj.time(m0) - q.threshold) > 1e-12 * (1.0 + q.threshold);
      out.f = Forcing::impulse(m0, 1.0);
      break;
    }
    case PsgQuery::Kind::positive_part: {
      if (q.threshold < 0.0 || q.threshold > traj.time(traj.n_steps) * (1.0 + 1e-12))
        throw std::invalid_argument("positive-part threshold outside [0, t]");
      const std::int64_t m0 = traj.grid_index(q.threshold, /*snap=*/true);
      out.snapped = std::fabs(traj.time(m0) - q.threshold) > 1e-12 * (1.0 + q.threshold);
      out.f = Forcing::after_step(m0);
      break;
    }
    case PsgQuery::Kind::integral_of:
      if (!q.custom.nonnegative())
        throw std::invalid_argument("integral_of requires a nonnegative forcing descriptor");
      out.f = q.custom;
      break;
  }
  return out;
}

}  // namespace detail

// E_{N,t}[F] = sum_j h^{(f)}_j(t) + F(t) via the shared forced-tangent
// discretization. The value stays in [-1e-9, sup|F| + 1e-9] by scheme
// construction; a breach is a numeric fault, not a finding.
inline PsgEvaluation evaluate_ode(const Trajectory& traj, const PsgQuery& q) {
  const auto qf = detail::query_forcing(traj, q);
  const auto ft = integrate_forced(traj, qf.f);
  PsgEvaluation ev;
  ev.method = PsgEvaluation::Method::ode;
  ev.snapped = qf.snapped;
  ev.value = ft.sum_hf.back() + ft.F.back();
  ev.sup_F = ft.F.back();  // F is nondecreasing for admissible queries
  if (!(ev.value >= -1e-9 && ev.value <= ev.sup_F + 1e-9))
    throw NumericError("pseudo-Gibbs value escaped [0, sup F]", ev.value);
  return ev;
}

// Oracle: nested composite-Simpson evaluation of the recursion
//   E_n(T) = int_0^T exp(-(C_n(T) - C_n(s))) a_n(s) E_{n-1}(s) ds
// on the trajectory's own grid (identical V'' samples; left-Riemann C_n).
// Cost grows like the grid size per level; N <= 3 keeps it an oracle.
inline PsgEvaluation evaluate_quadrature(const Trajectory& traj, const PsgQuery& q) {
  if (traj.N > 3) throw std::invalid_argument("evaluate_quadrature: N <= 3 only (oracle)");
  const auto qf = detail::query_forcing(traj, q);
  const std::int64_t M = traj.n_steps;
  const double dt = traj.dt;

  // E_0(t_m) = F(t_m) with impulse jumps; remember jump locations so no
  // Simpson stencil straddles a discontinuity or kink.
  std::vector<double> e_prev(M + 1, 0.0);
  std::vector<std::int64_t> breaks{0};
  {
    double F_run = 0.0;
    for (std::int64_t m = 0;; ++m) {
      if (m == qf.f.impulse_step) F_run += qf.f.impulse_weight;
      e_prev[std::size_t(m)] = F_run;
      if (m == M) break;
      F_run += dt * qf.f.at(m);
    }
    if (qf.f.impulse_step >= 0 && qf.f.impulse_step <= M) breaks.push_back(qf.f.impulse_step);
    for (const auto& bx : qf.f.boxes) {
      if (bx.from > 0 && bx.from <= M) breaks.push_back(bx.from);
      if (bx.to > 0 && bx.to <= M) breaks.push_back(bx.to);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.back() != M) breaks.push_back(M);
  }
  std::vector<double> C(M + 1), a(M + 1), e_cur(M + 1);
  for (int site = 0; site < traj.N; ++site) {
    C[0] = 0.0;
    for (std::int64_t m = 0; m <= M; ++m) {
      a[std::size_t(m)] = eval(traj.spec, traj.u_at(m, site), 2);
      if (m < M) C[std::size_t(m + 1)] = C[std::size_t(m)] + a[std::size_t(m)] * dt;
    }
    // Stored e_prev values carry the right limit at jump points; a segment
    // END at a jump needs the left limit instead. Jumps only exist at the
    // first level (E_0 = F with the impulse).
    const auto e_end = [&](std::int64_t i) {
      double v = e_prev[std::size_t(i)];
      if (site == 0 && i == qf.f.impulse_step) v -= qf.f.impulse_weight;
      return v;
    };
    e_cur.assign(M + 1, 0.0);
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
      const std::int64_t lo = breaks[seg], hi = breaks[seg + 1];
      for (std::int64_t m = lo; m < hi; m += 2) {
        const double c0 = C[std::size_t(m)], c1 = C[std::size_t(m + 1)];
        if (m + 2 <= hi) {
          const double c2 = C[std::size_t(m + 2)];
          const double g0 = std::exp(c0 - c2) * a[std::size_t(m)] * e_prev[std::size_t(m)];
          const double g1 = std::exp(c1 - c2) * a[std::size_t(m + 1)] * e_prev[std::size_t(m + 1)];
          const double g2 = a[std::size_t(m + 2)] *
                            (m + 2 == hi ? e_end(m + 2) : e_prev[std::size_t(m + 2)]);
          e_cur[std::size_t(m + 2)] = std::exp(c0 - c2) * e_cur[std::size_t(m)] +
                                      dt / 3.0 * (g0 + 4.0 * g1 + g2);
          // odd interior point by one trapezoid step
          const double t0 = std::exp(c0 - c1) * a[std::size_t(m)] * e_prev[std::size_t(m)];
          const double t1 = a[std::size_t(m + 1)] * e_prev[std::size_t(m + 1)];
          e_cur[std::size_t(m + 1)] = std::exp(c0 - c1) * e_cur[std::size_t(m)] +
                                      dt / 2.0 * (t0 + t1);
        } else {  // trailing single interval of an odd-length segment
          const double t0 = std::exp(c0 - c1) * a[std::size_t(m)] * e_prev[std::size_t(m)];
          const double t1 = a[std::size_t(m + 1)] * e_end(m + 1);
          e_cur[std::size_t(m + 1)] = std::exp(c0 - c1) * e_cur[std::size_t(m)] +
                                      dt / 2.0 * (t0 + t1);
        }
      }
    }
    e_prev = e_cur;
  }

  PsgEvaluation ev;
  ev.method = PsgEvaluation::Method::quadrature;
  ev.snapped = qf.snapped;
  ev.value = e_prev[std::size_t(M)];
  ev.sup_F = [&] {
    double F_run = qf.f.impulse_step >= 0 ? qf.f.impulse_weight : 0.0;
    for (std::int64_t m = 0; m < M; ++m) F_run += dt * qf.f.at(m);
    return F_run;
  }();
  return ev;
}

// Distributional shift check: E_{N,t}[1_{s0 > tau}] against an independent
// ensemble's E_{N,t-tau}[1_{s0 > 0}].
struct ShiftCheckReport {
  double ks_statistic = 0.0;
  double p_value = 1.0;
  int replicas = 0;
  double tau = 0.0, t = 0.0;
};

inline ShiftCheckReport stationarity_shift_check(const PotentialSpec& spec,
                                                 const EquilibriumMeasure& measure, int N,
                                                 double t, double tau, int replicas,
                                                 std::uint64_t seed, double dt, Scheme scheme) {
  if (!(tau >= 0.0 && tau <= t)) throw std::invalid_argument("shift check needs 0 <= tau <= t");
  std::vector<double> va(replicas), vb(replicas);
  const std::int64_t steps_a = llround(t / dt), steps_b = llround((t - tau) / dt);
  for (int r = 0; r < replicas; ++r) {
    NoiseBlock na(seed, std::uint32_t(r), dt, steps_a + 1, N + 1);
    auto ta = simulate(spec, measure, Drive{measure.theta}, N, t, na, scheme);
    va[std::size_t(r)] = evaluate_ode(ta, PsgQuery::tail_indicator(tau)).value;

    NoiseBlock nb(seed, std::uint32_t(replicas + r), dt, steps_b + 1, N + 1);
    auto tb = simulate(spec, measure, Drive{measure.theta}, N, t - tau, nb, scheme);
    vb[std::size_t(r)] = evaluate_ode(tb, PsgQuery::tail_indicator(0.0)).value;
  }
  auto ks = two_sample_ks(va, vb);
  return {ks.statistic, ks.p_value, replicas, tau, t};
}

}  // namespace oy
