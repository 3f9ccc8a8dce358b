#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "oy/equilibrium.hpp"
#include "oy/errors.hpp"
#include "oy/potential.hpp"
#include "oy/rng.hpp"

namespace oy {

enum class Scheme { tamed_euler, semi_implicit, exact_gaussian };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::tamed_euler: return "tamed_euler";
    case Scheme::semi_implicit: return "semi_implicit";
    case Scheme::exact_gaussian: return "exact_gaussian";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& s) {
  if (s == "tamed_euler") return Scheme::tamed_euler;
  if (s == "semi_implicit") return Scheme::semi_implicit;
  if (s == "exact_gaussian") return Scheme::exact_gaussian;
  throw std::invalid_argument("unknown scheme: " + s);
}

// Drive switched from theta1 to theta2 at Y N^{2/3}, snapped to the grid.
struct ThreeParamDrive {
  double theta1 = 1.0, theta2 = 1.0;
  double Y = 0.0;
  double requested_switch_time = 0.0;
  double switch_time = 0.0;     // snapped
  std::int64_t switch_step = 0; // steps before this one use theta1
};

inline ThreeParamDrive make_three_param_drive(double theta1, double theta2, double Y,
                                              std::int64_t N, double dt) {
  if (!(theta1 > 0.0 && theta2 > 0.0)) throw std::invalid_argument("drive thetas must be positive");
  if (!(Y >= 0.0)) throw std::invalid_argument("switch multiple Y must be nonnegative");
  ThreeParamDrive d;
  d.theta1 = theta1;
  d.theta2 = theta2;
  d.Y = Y;
  d.requested_switch_time = Y * std::pow(double(N), 2.0 / 3.0);
  d.switch_step = llround(d.requested_switch_time / dt);
  d.switch_time = double(d.switch_step) * dt;
  return d;
}

using Drive = std::variant<double, ThreeParamDrive>;

inline double drive_at_step(const Drive& drive, std::int64_t m) {
  if (std::holds_alternative<double>(drive)) return std::get<double>(drive);
  const auto& d = std::get<ThreeParamDrive>(drive);
  return m < d.switch_step ? d.theta1 : d.theta2;
}

inline bool drive_positive(const Drive& drive) {
  if (std::holds_alternative<double>(drive)) return std::get<double>(drive) > 0.0;
  const auto& d = std::get<ThreeParamDrive>(drive);
  return d.theta1 > 0.0 && d.theta2 > 0.0;
}

namespace detail {
// Tamed drift: d/(1 + dt|d|); maps an overflowing drift to +-1/dt.
inline double tame(double d, double dt) {
  if (std::isinf(d)) return std::copysign(1.0 / dt, d);
  return d / (1.0 + dt * std::fabs(d));
}

// Scalar solve of x + dt V'(x) = rhs (g' = 1 + dt V'' >= 1, so the root is
// unique). Newton with a bisection safeguard inside a monotone bracket.
inline double solve_implicit_site(const PotentialSpec& spec, double dt, double rhs) {
  double lo = rhs;  // V' <= 0 makes g(rhs) <= 0
  double vlo = eval(spec, lo, 1);
  double hi = std::isfinite(vlo) ? rhs - dt * vlo : rhs + 1.0;
  while (!(hi + dt * eval(spec, hi, 1) - rhs >= 0.0)) {
    hi += std::max(1.0, hi - lo);
    if (hi - lo > 1e8) throw NumericError("semi-implicit bracket expansion failed");
  }
  double x = std::clamp(rhs, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double g = x + dt * eval(spec, x, 1) - rhs;
    if (std::fabs(g) <= 1e-14 * (1.0 + std::fabs(x))) return x;
    if (g > 0.0) hi = x; else lo = x;
    const double gp = 1.0 + dt * eval(spec, x, 2);
    double next = std::isfinite(gp) ? x - g / gp : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;  // bracket is ~1 ulp wide at this point
}
}  // namespace detail

// Advances the N-site state by one step in place. xi must hold the N+1
// Brownian increments of this step. The site loop is order-dependent: the
// system closes from the top (site j sees only sites <= j).
inline void system_step(const PotentialSpec& spec, Scheme scheme, double dt, double theta,
                        const double* xi, std::vector<double>& u, std::vector<double>& vp_scratch) {
  const int N = int(u.size());
  switch (scheme) {
    case Scheme::tamed_euler: {
      vp_scratch.resize(N);
      for (int j = 0; j < N; ++j) vp_scratch[j] = eval(spec, u[j], 1);
      for (int j = 0; j < N; ++j) {
        const double drift = (j == 0) ? -vp_scratch[0] - theta : vp_scratch[j - 1] - vp_scratch[j];
        const double noise = (j == 0) ? xi[0] + xi[1] : xi[j + 1] - xi[j];
        u[j] += dt * detail::tame(drift, dt) + noise;
      }
      break;
    }
    case Scheme::semi_implicit: {
      for (int j = 0; j < N; ++j) {
        const double coupling = (j == 0) ? -theta : eval(spec, u[j - 1], 1);  // updated value
        const double noise = (j == 0) ? xi[0] + xi[1] : xi[j + 1] - xi[j];
        u[j] = detail::solve_implicit_site(spec, dt, u[j] + dt * coupling + noise);
      }
      break;
    }
    case Scheme::exact_gaussian: {
      const double decay = std::exp(-dt), gain = -std::expm1(-dt);
      double prev_old = 0.0;
      for (int j = 0; j < N; ++j) {
        const double target = (j == 0) ? -theta : prev_old;
        const double noise = (j == 0) ? xi[0] + xi[1] : xi[j + 1] - xi[j];
        prev_old = u[j];
        u[j] = decay * u[j] + gain * target + noise;
      }
      break;
    }
  }
}

// Streaming integrator: holds only the current state. Trajectory recording
// and the Monte Carlo loops share this stepping path bit for bit.
class PathSimulator {
 public:
  PathSimulator(const PotentialSpec& spec, Drive drive, int N, const NoiseBlock& noise,
                Scheme scheme, std::vector<double> u0, double explosion_bound = 1e3)
      : spec_(spec), drive_(drive), noise_(noise), scheme_(scheme), u_(std::move(u0)),
        explosion_bound_(explosion_bound), dt_(noise.dt()) {
    if (int(u_.size()) != N) throw std::invalid_argument("initial state size mismatch");
    if (noise.n_streams() < N + 1)
      throw std::invalid_argument("noise block has too few streams");
    if (scheme == Scheme::exact_gaussian && !spec.is_quadratic())
      throw std::invalid_argument("exact_gaussian scheme requires the quadratic potential");
    xi_.resize(N + 1);
    check_state();
  }

  void step() {
    const double theta = drive_at_step(drive_, step_);
    const std::int64_t pair = step_ >> 1;
    if (pair != cached_pair_) {
      pair_cache_.resize(u_.size() + 1);
      for (int s = 0; s <= int(u_.size()); ++s) pair_cache_[s] = noise_.increment_pair(s, pair);
      cached_pair_ = pair;
    }
    const int w = int(step_ & 1);
    for (int s = 0; s <= int(u_.size()); ++s) xi_[s] = pair_cache_[s][w];
    system_step(spec_, scheme_, dt_, theta, xi_.data(), u_, vp_);
    b0_ += xi_[0];
    time_ += dt_;
    ++step_;
    check_state();
  }

  void advance(std::int64_t n_steps) {
    for (std::int64_t i = 0; i < n_steps; ++i) step();
  }

  const std::vector<double>& state() const { return u_; }
  double b0() const { return b0_; }
  double time() const { return time_; }
  std::int64_t step_index() const { return step_; }
  double dt() const { return dt_; }

  // Running drive integral \int_0^t theta_s ds on the grid.
  double drive_integral() const {
    if (std::holds_alternative<double>(drive_)) return std::get<double>(drive_) * time_;
    const auto& d = std::get<ThreeParamDrive>(drive_);
    const double t1 = std::min(time_, d.switch_time);
    return d.theta1 * t1 + d.theta2 * std::max(0.0, time_ - d.switch_time);
  }

  double height() const {
    double s = 0.0;
    for (double v : u_) s += v;
    return s - b0_ + drive_integral();
  }

 private:
  void check_state() const {
    for (std::size_t j = 0; j < u_.size(); ++j)
      if (!(std::fabs(u_[j]) <= explosion_bound_))
        throw ExplosionError("explosion sentinel exceeded at site " + std::to_string(j + 1),
                             int(j + 1), time_, u_[j]);
  }

  PotentialSpec spec_;
  Drive drive_;
  NoiseBlock noise_;
  Scheme scheme_;
  std::vector<double> u_, xi_, vp_;
  std::vector<std::array<double, 2>> pair_cache_;
  std::int64_t cached_pair_ = -1;
  double explosion_bound_;
  double dt_;
  double b0_ = 0.0;
  double time_ = 0.0;
  std::int64_t step_ = 0;
};

// Time-discretized path of the full system plus everything needed to replay
// it: the coupling uniforms, the cumulative B_0, the drive, and the grid.
struct Trajectory {
  PotentialSpec spec;
  Drive drive;
  double eta = 1.0;
  int N = 0;
  double dt = 0.0;
  std::int64_t n_steps = 0;
  Scheme scheme = Scheme::tamed_euler;
  std::vector<double> q;      // coupling uniforms
  std::vector<double> u;      // (n_steps+1) x N, time-major
  std::vector<double> b0;     // cumulative B_0 on the grid
  std::vector<double> times;  // running-sum grid

  double u_at(std::int64_t m, int j) const { return u[std::size_t(m) * N + j]; }
  const double* row(std::int64_t m) const { return u.data() + std::size_t(m) * N; }
  double time(std::int64_t m) const { return times[std::size_t(m)]; }

  double drive_integral(std::int64_t m) const {
    if (std::holds_alternative<double>(drive)) return std::get<double>(drive) * times[std::size_t(m)];
    const auto& d = std::get<ThreeParamDrive>(drive);
    const double t = times[std::size_t(m)];
    return d.theta1 * std::min(t, d.switch_time) + d.theta2 * std::max(0.0, t - d.switch_time);
  }

  std::int64_t grid_index(double t, bool snap = false) const {
    const std::int64_t m = llround(t / dt);
    if (m < 0 || m > n_steps) throw std::invalid_argument("time outside the trajectory grid");
    if (!snap && std::fabs(times[std::size_t(m)] - t) > 1e-9 * (1.0 + std::fabs(t)))
      throw std::invalid_argument("time is not on the trajectory grid");
    return m;
  }
};

struct HeightSample {
  double W = 0.0;
  double sum_u = 0.0;
  double b0 = 0.0;
  double drift_integral = 0.0;
  int N = 0;
  double t = 0.0;
  double eta = 0.0;
  Drive drive;
};

inline std::vector<double> equilibrium_initial_state(const EquilibriumMeasure& measure_eta,
                                                     const NoiseBlock& noise, int N,
                                                     std::vector<double>* q_out = nullptr) {
  std::vector<double> u0(N);
  if (q_out) q_out->resize(N);
  for (int j = 0; j < N; ++j) {
    const double qj = noise.uniform(std::uint32_t(j));
    if (q_out) (*q_out)[j] = qj;
    u0[j] = inverse_cdf(measure_eta, qj);
  }
  return u0;
}

inline Trajectory simulate_from_state(const PotentialSpec& spec, Drive drive, int N,
                                      double t_end, const NoiseBlock& noise, Scheme scheme,
                                      std::vector<double> u0, std::vector<double> q,
                                      double eta, double explosion_bound = 1e3) {
  const std::int64_t n_steps = llround(t_end / noise.dt());
  if (noise.n_steps() < n_steps) throw std::invalid_argument("noise block too short for t_end");

  Trajectory traj;
  traj.spec = spec;
  traj.drive = drive;
  traj.eta = eta;
  traj.N = N;
  traj.dt = noise.dt();
  traj.n_steps = n_steps;
  traj.scheme = scheme;
  traj.q = std::move(q);
  traj.u.reserve(std::size_t(n_steps + 1) * N);
  traj.b0.reserve(n_steps + 1);
  traj.times.reserve(n_steps + 1);

  PathSimulator sim(spec, drive, N, noise, scheme, std::move(u0), explosion_bound);
  for (std::int64_t m = 0;; ++m) {
    traj.u.insert(traj.u.end(), sim.state().begin(), sim.state().end());
    traj.b0.push_back(sim.b0());
    traj.times.push_back(sim.time());
    if (m == n_steps) break;
    sim.step();
  }
  return traj;
}

// Equilibrium initial data H_eta(q_j) with q_j drawn from the noise block's
// coupling-uniform family.
inline Trajectory simulate(const PotentialSpec& spec, const EquilibriumMeasure& measure_eta,
                           Drive drive, int N, double t_end, const NoiseBlock& noise,
                           Scheme scheme, double explosion_bound = 1e3) {
  if (!drive_positive(drive)) throw std::invalid_argument("drive must be positive");
  std::vector<double> q;
  auto u0 = equilibrium_initial_state(measure_eta, noise, N, &q);
  return simulate_from_state(spec, drive, N, t_end, noise, scheme, std::move(u0), std::move(q),
                             measure_eta.theta, explosion_bound);
}

inline HeightSample height(const Trajectory& traj, double t) {
  const std::int64_t m = traj.grid_index(t);
  HeightSample h;
  h.N = traj.N;
  h.t = traj.time(m);
  h.eta = traj.eta;
  h.drive = traj.drive;
  const double* row = traj.row(m);
  for (int j = 0; j < traj.N; ++j) h.sum_u += row[j];
  h.b0 = traj.b0[std::size_t(m)];
  h.drift_integral = traj.drive_integral(m);
  h.W = h.sum_u - h.b0 + h.drift_integral;
  return h;
}

// All members share the identical uniforms and Brownian increments, so
// parameter differences are pathwise quantities.
inline std::vector<Trajectory> coupled_family(const PotentialSpec& spec,
                                              const std::vector<double>& q,
                                              const NoiseBlock& noise,
                                              const std::vector<std::pair<double, Drive>>& params,
                                              int N, double t_end, Scheme scheme,
                                              double tail_tol = 1e-14, double quad_tol = 1e-10) {
  if (int(q.size()) < N) throw std::invalid_argument("coupled_family: q shorter than N");
  std::map<double, EquilibriumMeasure> measures;
  std::vector<Trajectory> out;
  out.reserve(params.size());
  for (const auto& [eta, drive] : params) {
    auto it = measures.find(eta);
    if (it == measures.end())
      it = measures.emplace(eta, build_equilibrium(spec, eta, tail_tol, quad_tol)).first;
    std::vector<double> u0(N);
    for (int j = 0; j < N; ++j) u0[j] = inverse_cdf(it->second, q[j]);
    out.push_back(simulate_from_state(spec, drive, N, t_end, noise, scheme, std::move(u0),
                                      std::vector<double>(q.begin(), q.begin() + N), eta));
  }
  return out;
}

// dt heuristic: 1e-2 * min(1, 1/V''(x)) at the 1e-3 quantile of nu_theta.
inline double suggested_dt(const EquilibriumMeasure& m) {
  const double x_typ = inverse_cdf(m, 1e-3);
  const double v2 = eval(m.spec, x_typ, 2);
  return 1e-2 * std::min(1.0, std::isfinite(v2) && v2 > 0.0 ? 1.0 / v2 : 1.0);
}

}  // namespace oy
