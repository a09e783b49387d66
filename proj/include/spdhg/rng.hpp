#pragma once

// Counter-based random stream: every value is a pure function of
// (seed, counter), so any draw can be replayed or evaluated out of order.

#include <cmath>
#include <cstdint>

namespace spdhg {

// SplitMix64 output function on the decorrelated counter position.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Uniform on [0, 1) with 53-bit resolution.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  return static_cast<double>(counter_hash(seed, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counter positions 2c and 2c+1.
inline double normal01(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = uniform01(seed, 2 * counter);      // 1-u1 in (0,1]
  const double u2 = uniform01(seed, 2 * counter + 1);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(6.283185307179586476925286766559 * u2);
}

// Stateful view over a counter stream; all state is the counter itself.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t start = 0)
      : seed_(seed), counter_(start) {}

  double next_uniform() { return uniform01(seed_, counter_++); }
  double next_normal() { return normal01(seed_, counter_++); }

  // Uniform integer in [0, n) by scaling; n is tiny relative to 2^53.
  std::uint64_t next_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace spdhg
