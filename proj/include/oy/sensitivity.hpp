#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "oy/dynamics.hpp"
#include "oy/errors.hpp"

namespace oy {

// Integrating-factor (exponential Euler) step for the triangular tangent
// systems. Every update is a nonnegative combination of same-signed terms,
// so the sign structure of the continuous lemmas survives in floating point:
//   site lanes    v_j <- e^{-z_j} v_j + (1 - e^{-z_{j-1}}) v_{j-1}
//   partial lanes P_j <- e^{-z_j} P_j + (1 - e^{-z_j}) P_{j-1} + forcing_j
// with z_j = V''(u_j) dt frozen at the left endpoint state.
namespace tangent {

struct StepCoeffs {
  std::vector<double> a, b, ea, om, w;  // V'', -V''', exp(-z), 1-exp(-z), weight

  void compute(const PotentialSpec& spec, const double* u, int N, double dt, double t_now) {
    a.resize(N); b.resize(N); ea.resize(N); om.resize(N); w.resize(N);
    for (int j = 0; j < N; ++j) {
      const double aj = eval(spec, u[j], 2);
      if (!std::isfinite(aj))
        throw NumericError("non-finite V'' at site " + std::to_string(j + 1) + ", time " +
                           std::to_string(t_now));
      const double bj = -eval(spec, u[j], 3);
      a[j] = aj;
      b[j] = bj;
      const double z = aj * dt;
      ea[j] = std::exp(-z);
      om[j] = -std::expm1(-z);
      w[j] = aj > 0.0 ? std::min(om[j] / aj, dt) : dt;
    }
  }
};

// Site lane with nonnegative forcing -f(t) into site 1 (h and h^{(f)} lanes).
inline void step_forced_sites(const StepCoeffs& c, double f_m, std::vector<double>& v) {
  const int N = int(v.size());
  double prev_old = 0.0;
  for (int j = 0; j < N; ++j) {
    const double cur_old = v[j];
    v[j] = (j == 0) ? c.ea[0] * v[0] - c.w[0] * f_m
                    : c.ea[j] * v[j] + c.om[j - 1] * prev_old;
    prev_old = cur_old;
  }
}

// Homogeneous site lane (k lane and the eta-eta homogeneous component).
inline void step_homogeneous_sites(const StepCoeffs& c, std::vector<double>& v) {
  const int N = int(v.size());
  double prev_old = 0.0;
  for (int j = 0; j < N; ++j) {
    const double cur_old = v[j];
    v[j] = c.ea[j] * v[j] + (j == 0 ? 0.0 : c.om[j - 1] * prev_old);
    prev_old = cur_old;
  }
}

// Partial-sum lane P_j = sum_{i<=j} of a site lane (+ head term). `head` is
// the lane's P_0 value at the left endpoint; `extra` is an additive
// nonnegative forcing common to every level (the d/dtheta lane's dt - w_1).
inline void step_partials(const StepCoeffs& c, double head, double extra,
                          std::vector<double>& P) {
  const int N = int(P.size());
  double prev_old = head;
  for (int j = 0; j < N; ++j) {
    const double cur_old = P[j];
    P[j] = c.ea[j] * P[j] + c.om[j] * prev_old + extra;
    prev_old = cur_old;
  }
}

// Second-derivative partial-sum lane with forcing w_j b_j g_j, g from the
// first-order site lanes at the left endpoint.
template <typename G>
inline void step_partials_forced2(const StepCoeffs& c, G&& g, std::vector<double>& P) {
  const int N = int(P.size());
  double prev_old = 0.0;
  for (int j = 0; j < N; ++j) {
    const double cur_old = P[j];
    P[j] = c.ea[j] * P[j] + c.om[j] * prev_old + c.w[j] * c.b[j] * g(j);
    prev_old = cur_old;
  }
}

// Mixed monitor A_j = (d_eta d_theta W_j) + c0 (d_theta W_j)(d_eta W_j), in
// telescoped form: its forcing om_j ((b_j/a_j - c0) + c0 om_j) h_j k_j is
// nonnegative whenever the audited c0 <= -V'''/V'' along the path.
inline void step_mixed_monitor(const StepCoeffs& c, double c0, const double* h,
                               const double* k, std::vector<double>& A) {
  const int N = int(A.size());
  double prev_old = 0.0;
  for (int j = 0; j < N; ++j) {
    const double cur_old = A[j];
    const double coef =
        c.a[j] > 0.0 ? c.om[j] * ((c.b[j] / c.a[j] - c0) + c0 * c.om[j]) : 0.0;
    A[j] = c.ea[j] * A[j] + c.om[j] * prev_old + coef * (h[j] * k[j]);
    prev_old = cur_old;
  }
}

}  // namespace tangent

// Pathwise first/second parameter derivatives along one trajectory.
struct SensitivityBundle {
  int N = 0;
  std::int64_t n_steps = 0;
  double dt = 0.0;
  double c0 = 0.0;

  std::vector<double> h, k;        // (n_steps+1) x N site histories
  std::vector<double> dW_dtheta;   // per time; telescoped, nonnegative by scheme
  std::vector<double> dW_deta;     // per time, nonpositive
  std::vector<double> times;

  bool has_second = false;
  std::vector<double> d2W_dtheta2, d2W_dthetadeta, d2W_deta2;  // per time
  std::vector<double> mixed_monitor;                           // A_N per time
  double X_eta = 0.0;  // sum |d2_eta H(q_j)|: lower envelope for d2W_deta2

  double h_at(std::int64_t m, int j) const { return h[std::size_t(m) * N + j]; }
  double k_at(std::int64_t m, int j) const { return k[std::size_t(m) * N + j]; }
};

inline std::vector<double> eta_tangent_initial(const EquilibriumMeasure& measure,
                                               const std::vector<double>& q, int order = 1) {
  std::vector<double> out(q.size());
  for (std::size_t j = 0; j < q.size(); ++j)
    out[j] = inverse_cdf_eta_derivative(measure, q[j], order);
  return out;
}

// First-order tangents h_j = d_theta u_j (zero initial data, unit forcing
// into site 1) and k_j = d_eta u_j (initial data k0 <= 0, homogeneous).
inline SensitivityBundle integrate_first_order(const Trajectory& traj,
                                               const std::vector<double>& k0) {
  const int N = traj.N;
  if (int(k0.size()) != N) throw std::invalid_argument("k0 size mismatch");
  for (double v : k0)
    if (!(v <= 0.0)) throw std::invalid_argument("k0 must be nonpositive");

  SensitivityBundle b;
  b.N = N;
  b.n_steps = traj.n_steps;
  b.dt = traj.dt;
  b.times = traj.times;
  b.h.assign(std::size_t(traj.n_steps + 1) * N, 0.0);
  b.k.resize(std::size_t(traj.n_steps + 1) * N);
  std::copy(k0.begin(), k0.end(), b.k.begin());
  b.dW_dtheta.resize(traj.n_steps + 1);
  b.dW_deta.resize(traj.n_steps + 1);

  std::vector<double> h(N, 0.0), k = k0;
  std::vector<double> S(N, 0.0);  // telescoped d_theta W_j
  std::vector<double> K(N);       // telescoped d_eta W_j
  {
    double acc = 0.0;
    for (int j = 0; j < N; ++j) K[j] = (acc += k0[j]);
  }
  b.dW_dtheta[0] = 0.0;
  b.dW_deta[0] = K[N - 1];

  tangent::StepCoeffs c;
  for (std::int64_t m = 0; m < traj.n_steps; ++m) {
    c.compute(traj.spec, traj.row(m), N, traj.dt, traj.time(m));
    tangent::step_partials(c, traj.time(m), traj.dt - c.w[0], S);
    tangent::step_partials(c, 0.0, 0.0, K);
    tangent::step_forced_sites(c, 1.0, h);
    tangent::step_homogeneous_sites(c, k);
    std::copy(h.begin(), h.end(), b.h.begin() + std::size_t(m + 1) * N);
    std::copy(k.begin(), k.end(), b.k.begin() + std::size_t(m + 1) * N);
    b.dW_dtheta[std::size_t(m + 1)] = S[N - 1];
    b.dW_deta[std::size_t(m + 1)] = K[N - 1];
  }
  return b;
}

// Second-derivative partial sums d2W in (theta,theta), (theta,eta),
// (eta,eta), plus the mixed monitor. k2_0 carries d2_eta H(q_j).
inline void integrate_second_order(const Trajectory& traj, SensitivityBundle& b,
                                   const std::vector<double>& k2_0, double c0) {
  const int N = traj.N;
  if (int(k2_0.size()) != N) throw std::invalid_argument("k2_0 size mismatch");
  if (b.h.empty()) throw std::invalid_argument("first-order bundle required");
  b.has_second = true;
  b.c0 = c0;
  b.d2W_dtheta2.assign(traj.n_steps + 1, 0.0);
  b.d2W_dthetadeta.assign(traj.n_steps + 1, 0.0);
  b.d2W_deta2.resize(traj.n_steps + 1);
  b.mixed_monitor.assign(traj.n_steps + 1, 0.0);
  b.X_eta = 0.0;
  for (double v : k2_0) b.X_eta += std::fabs(v);

  std::vector<double> Fthth(N, 0.0), Ftheta(N, 0.0), Fee(N, 0.0);
  std::vector<double> mee = k2_0;  // homogeneous eta-eta component, site values
  std::vector<double> A(N, 0.0);
  double sum_mee = 0.0;
  for (double v : mee) sum_mee += v;
  b.d2W_deta2[0] = sum_mee;

  tangent::StepCoeffs c;
  for (std::int64_t m = 0; m < traj.n_steps; ++m) {
    c.compute(traj.spec, traj.row(m), N, traj.dt, traj.time(m));
    const double* hrow = b.h.data() + std::size_t(m) * N;
    const double* krow = b.k.data() + std::size_t(m) * N;
    tangent::step_mixed_monitor(c, c0, hrow, krow, A);
    tangent::step_partials_forced2(c, [&](int j) { return hrow[j] * hrow[j]; }, Fthth);
    tangent::step_partials_forced2(c, [&](int j) { return hrow[j] * krow[j]; }, Ftheta);
    tangent::step_partials_forced2(c, [&](int j) { return krow[j] * krow[j]; }, Fee);
    tangent::step_homogeneous_sites(c, mee);
    sum_mee = 0.0;
    for (double v : mee) sum_mee += v;
    b.d2W_dtheta2[std::size_t(m + 1)] = Fthth[N - 1];
    b.d2W_dthetadeta[std::size_t(m + 1)] = Ftheta[N - 1];
    b.d2W_deta2[std::size_t(m + 1)] = Fee[N - 1] + sum_mee;
    b.mixed_monitor[std::size_t(m + 1)] = A[N - 1];
  }
}

// Piecewise-constant forcing on the step grid plus an optional impulse.
struct Forcing {
  struct Box {
    std::int64_t from = 0;
    std::int64_t to = std::numeric_limits<std::int64_t>::max();  // half-open [from, to)
    double value = 0.0;
  };
  double constant = 0.0;
  std::vector<Box> boxes;
  double impulse_weight = 0.0;
  std::int64_t impulse_step = -1;

  double at(std::int64_t m) const {
    double f = constant;
    for (const auto& bx : boxes)
      if (m >= bx.from && m < bx.to) f += bx.value;
    return f;
  }
  bool nonnegative() const {
    if (constant < 0.0 || impulse_weight < 0.0) return false;
    for (const auto& bx : boxes)
      if (constant + bx.value < 0.0) return false;
    return true;
  }

  static Forcing ones() {
    Forcing f;
    f.constant = 1.0;
    return f;
  }
  static Forcing after_step(std::int64_t from) {
    Forcing f;
    f.boxes.push_back({from, std::numeric_limits<std::int64_t>::max(), 1.0});
    return f;
  }
  static Forcing impulse(std::int64_t step, double weight = 1.0) {
    Forcing f;
    f.impulse_weight = weight;
    f.impulse_step = step;
    return f;
  }
};

struct ForcedTangent {
  Forcing forcing;
  bool sign_assertable = false;  // set when f >= 0
  int N = 0;
  std::int64_t n_steps = 0;
  std::vector<double> hf;      // (n_steps+1) x N
  std::vector<double> sum_hf;  // per time
  std::vector<double> F;       // running F(t_m), impulses included
  double hf_at(std::int64_t m, int j) const { return hf[std::size_t(m) * N + j]; }
};

inline ForcedTangent integrate_forced(const Trajectory& traj, const Forcing& f) {
  const int N = traj.N;
  ForcedTangent out;
  out.forcing = f;
  out.sign_assertable = f.nonnegative();
  out.N = N;
  out.n_steps = traj.n_steps;
  out.hf.assign(std::size_t(traj.n_steps + 1) * N, 0.0);
  out.sum_hf.assign(traj.n_steps + 1, 0.0);
  out.F.assign(traj.n_steps + 1, 0.0);

  std::vector<double> h(N, 0.0);
  double F_run = 0.0;
  tangent::StepCoeffs c;
  for (std::int64_t m = 0;; ++m) {
    if (m == f.impulse_step) {
      h[0] -= f.impulse_weight;
      F_run += f.impulse_weight;
      std::copy(h.begin(), h.end(), out.hf.begin() + std::size_t(m) * N);
      double s = 0.0;
      for (double v : h) s += v;
      out.sum_hf[std::size_t(m)] = s;
    }
    out.F[std::size_t(m)] = F_run;
    if (m == traj.n_steps) break;
    c.compute(traj.spec, traj.row(m), N, traj.dt, traj.time(m));
    tangent::step_forced_sites(c, f.at(m), h);
    F_run += traj.dt * f.at(m);
    std::copy(h.begin(), h.end(), out.hf.begin() + std::size_t(m + 1) * N);
    double s = 0.0;
    for (double v : h) s += v;
    out.sum_hf[std::size_t(m + 1)] = s;
  }
  return out;
}

}  // namespace oy
