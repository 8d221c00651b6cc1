#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace slug {

// Raised on structural misuse: shape mismatches, layout mismatches,
// malformed files, bad configuration keys.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when training diverges or an experiment cell fails at runtime.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

}  // namespace slug
