#pragma once

// Counter-based random numbers: every draw is a pure function of
// (key, counter), so results do not depend on execution order.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace metrosim {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the index-th independent stream derived from `base_seed`.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform in (0, 1) for the given (key, counter, lane).
inline double counter_uniform(std::uint64_t key, std::uint64_t counter, std::uint64_t lane = 0) {
  const std::uint64_t bits = splitmix64(key ^ splitmix64(counter * 2 + lane + 1));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two counter-based uniforms.
inline double counter_normal(std::uint64_t key, std::uint64_t counter) {
  const double u1 = counter_uniform(key, counter, 0);
  const double u2 = counter_uniform(key, counter, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace metrosim
