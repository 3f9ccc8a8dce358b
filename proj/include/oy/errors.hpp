#pragma once

#include <stdexcept>
#include <string>

namespace oy {

struct NumericError : std::runtime_error {
  double achieved_tolerance;
  explicit NumericError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
};

// Raised when the explosion sentinel trips; carries the last finite state.
struct ExplosionError : std::runtime_error {
  int site;
  double time;
  double value;
  ExplosionError(const std::string& what, int site_, double time_, double value_)
      : std::runtime_error(what), site(site_), time(time_), value(value_) {}
};

}  // namespace oy
