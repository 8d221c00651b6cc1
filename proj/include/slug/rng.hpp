#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Counter-based random number generation. Every draw is addressed by
// (seed, stream, index) so any value can be reproduced in isolation,
// without shared generator state. This is what makes per-sample epsilon
// draws, probe vectors and sketch entries replayable across threads.

namespace slug::rng {

// Fixed stream ids. Keeping them in one place avoids accidental overlap
// between modules that share a seed.
enum class Stream : std::uint64_t {
  param_init = 1,
  train_shuffle = 2,
  train_eps = 3,
  data_base = 4,
  data_lesion = 5,
  data_noise = 6,
  artifact = 7,
  probe = 8,
  sketch = 9,
  lanczos_start = 10,
  subsample = 11,
  feature_net = 12,
};

inline std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t index) {
  return splitmix(splitmix(splitmix(seed) + stream) + index);
}

inline std::uint64_t hash3(std::uint64_t seed, Stream stream,
                           std::uint64_t index) {
  return hash3(seed, static_cast<std::uint64_t>(stream), index);
}

// Derives an independent seed, e.g. one per dataset record.
inline std::uint64_t sub_seed(std::uint64_t seed, Stream stream,
                              std::uint64_t index) {
  return hash3(seed, stream, index);
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return static_cast<double>(hash3(seed, stream, index) >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t index,
                      double lo, double hi) {
  return lo + (hi - lo) * uniform(seed, stream, index);
}

// Standard normal via Box-Muller on counters (2*index, 2*index+1).
// u1 is shifted into (0, 1] so the log never sees zero.
inline double gaussian(std::uint64_t seed, Stream stream,
                       std::uint64_t index) {
  const std::uint64_t b1 = hash3(seed, stream, 2 * index);
  const std::uint64_t b2 = hash3(seed, stream, 2 * index + 1);
  const double u1 = static_cast<double>((b1 >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(b2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline double rademacher(std::uint64_t seed, Stream stream,
                         std::uint64_t index) {
  return (hash3(seed, stream, index) & 1ull) ? 1.0 : -1.0;
}

inline void fill_gaussian(std::vector<double>& out, std::uint64_t seed,
                          Stream stream, std::uint64_t base_index = 0) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = gaussian(seed, stream, base_index + i);
  }
}

inline void fill_rademacher(std::vector<double>& out, std::uint64_t seed,
                            Stream stream, std::uint64_t base_index = 0) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rademacher(seed, stream, base_index + i);
  }
}

// Deterministic Fisher-Yates permutation of {0, ..., n-1}.
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed,
                                            Stream stream,
                                            std::uint64_t base_index = 0) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t r = hash3(seed, stream, base_index + i);
    const std::size_t j = static_cast<std::size_t>(r % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace slug::rng
