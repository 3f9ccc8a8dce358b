#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace oy {

// Philox 4x32-10 counter-based block cipher. A (key, counter) pair maps to
// four 32-bit words; distinct counters give independent draws, so replicas
// and parameter-coupled runs can regenerate any increment out of order.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const std::array<std::uint32_t, 4> next{
          std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
          std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
      ctr = next;
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// Uniform double strictly inside (0,1) from 64 random bits.
inline double bits_to_unit_interval(std::uint64_t x) {
  return (double(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Two uniforms from one Philox block.
inline std::array<double, 2> philox_uniform2(std::uint64_t seed,
                                             std::uint32_t w0, std::uint32_t w1,
                                             std::uint32_t w2, std::uint32_t w3) {
  const auto r = Philox4x32::block({w0, w1, w2, w3},
                                   {std::uint32_t(seed), std::uint32_t(seed >> 32)});
  const std::uint64_t a = (std::uint64_t(r[0]) << 32) | r[1];
  const std::uint64_t b = (std::uint64_t(r[2]) << 32) | r[3];
  return {bits_to_unit_interval(a), bits_to_unit_interval(b)};
}

// Wichura's PPND16 (AS 241): inverse of the standard normal CDF, |err| ~ 1e-16.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p outside (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -x : x;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014327; }

// Counter word 0 tags the draw family. Noise levels 0..47 are the Brownian
// bridge hierarchy; other families share the key space without collisions.
namespace rng_tag {
constexpr std::uint32_t noise_level0 = 0;   // + refinement level
constexpr std::uint32_t coupling_uniforms = 64;
constexpr std::uint32_t aux_uniforms = 65;
}  // namespace rng_tag

// Gaussian increments for Brownian motions B_0..B_N plus the coupling
// uniforms q_j, all derived from (seed, replica). An increment is a pure
// function of (seed, replica, stream, step, level); regenerating is
// bit-identical. refined() halves dt via a Brownian bridge: the two child
// increments of a step sum back to their parent.
class NoiseBlock {
 public:
  NoiseBlock(std::uint64_t seed, std::uint32_t replica, double dt,
             std::int64_t n_steps, int n_streams)
      : seed_(seed), replica_(replica), base_dt_(dt), base_steps_(n_steps),
        n_streams_(n_streams) {
    if (!(dt > 0.0)) throw std::invalid_argument("NoiseBlock: dt must be positive");
    if (n_steps < 0) throw std::invalid_argument("NoiseBlock: negative step count");
  }

  static NoiseBlock zeros(double dt, std::int64_t n_steps, int n_streams) {
    NoiseBlock nb(0, 0, dt, n_steps, n_streams);
    nb.amplitude_ = 0.0;
    return nb;
  }

  double dt() const { return std::ldexp(base_dt_, -level_); }
  std::int64_t n_steps() const { return base_steps_ << level_; }
  int n_streams() const { return n_streams_; }
  int level() const { return level_; }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t replica() const { return replica_; }

  NoiseBlock refined() const {
    NoiseBlock nb = *this;
    ++nb.level_;
    return nb;
  }

  // Gaussian increment of variance dt() for stream in [0, n_streams).
  double increment(int stream, std::int64_t step) const {
    return amplitude_ * increment_at_level(stream, step, level_);
  }

  // Both increments of the step pair (2k, 2k+1); at level 0 they come from a
  // single Philox block, bit-identical to increment().
  std::array<double, 2> increment_pair(int stream, std::int64_t pair) const {
    if (level_ == 0) {
      const auto u = philox_uniform2(seed_, rng_tag::noise_level0, replica_,
                                     std::uint32_t(stream), std::uint32_t(pair));
      const double s = std::sqrt(base_dt_);
      return {amplitude_ * (s * inverse_normal_cdf(u[0])),
              amplitude_ * (s * inverse_normal_cdf(u[1]))};
    }
    return {increment(stream, 2 * pair), increment(stream, 2 * pair + 1)};
  }

  // Coupling uniform q_j, shared by every parameter variant run on this block.
  double uniform(std::uint32_t idx) const {
    return philox_uniform2(seed_, rng_tag::coupling_uniforms, replica_, idx, 0)[0];
  }

  double aux_uniform(std::uint32_t idx) const {
    return philox_uniform2(seed_, rng_tag::aux_uniforms, replica_, idx, 0)[0];
  }

 private:
  double normal_draw(std::uint32_t level, int stream, std::int64_t step) const {
    // One Philox block carries the normals of steps 2k and 2k+1.
    const auto u = philox_uniform2(seed_, rng_tag::noise_level0 + level,
                                   replica_, std::uint32_t(stream),
                                   std::uint32_t(step >> 1));
    return inverse_normal_cdf(u[step & 1]);
  }

  double increment_at_level(int stream, std::int64_t step, int level) const {
    const double dt_l = std::ldexp(base_dt_, -level);
    if (level == 0) return std::sqrt(dt_l) * normal_draw(0, stream, step);
    const double parent = increment_at_level(stream, step >> 1, level - 1);
    const double xi = std::sqrt(0.5 * dt_l) * normal_draw(std::uint32_t(level), stream, step >> 1);
    return 0.5 * parent + ((step & 1) ? -xi : xi);
  }

  std::uint64_t seed_;
  std::uint32_t replica_;
  double base_dt_;
  std::int64_t base_steps_;
  int n_streams_;
  int level_ = 0;
  double amplitude_ = 1.0;
};

}  // namespace oy
