#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace mfbsde::detail {

// splitmix64 step, used to derive independent per-path seeds from a base
// seed so path k is reproducible no matter how paths are distributed over
// threads.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (index + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1): rejects exact zero so -log stays finite.
inline double uniform01_open(std::mt19937_64& rng) {
  double u = uniform01(rng);
  while (u == 0.0) u = uniform01(rng);
  return u;
}

inline double exponential(std::mt19937_64& rng, double rate) {
  return -std::log(uniform01_open(rng)) / rate;
}

// Draws an index from a probability vector by inverting the cdf. Every
// consumer of per-path seeds uses this exact draw so a path is identified
// by (base seed, index) alone.
inline int draw_from_law(std::mt19937_64& rng, const Eigen::VectorXd& law) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < law.size(); ++i) {
    acc += law[i];
    if (u < acc) return i;
  }
  return static_cast<int>(law.size()) - 1;
}

}  // namespace mfbsde::detail
