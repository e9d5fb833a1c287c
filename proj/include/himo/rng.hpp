#pragma once

// Seed derivation and serialisable RNG streams. A master seed is split into
// named substreams via splitmix64 so that independent components (env,
// action sampling, replay, eval, ...) never share draws.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace himo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic substream seed for a (master seed, component tag, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ (tag * 0x9e3779b97f4a7c15ULL)) ^ index);
}

// Component tags (arbitrary distinct constants).
namespace seed_tag {
inline constexpr std::uint64_t params = 1;
inline constexpr std::uint64_t env = 2;
inline constexpr std::uint64_t actions = 3;
inline constexpr std::uint64_t replay = 4;
inline constexpr std::uint64_t eval = 5;
inline constexpr std::uint64_t probe = 6;
inline constexpr std::uint64_t instance = 7;
}  // namespace seed_tag

// Portable samplers built directly on the (fully specified) mt19937_64 bit
// stream, so sampled values do not depend on the standard library's
// distribution implementations.

// Uniform in [0, 1) with 53 random mantissa bits.
inline double sample_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection (unbiased).
inline std::uint64_t sample_index(std::mt19937_64& g, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % n;
}

// Standard normal via Box-Muller (one value per call; two uniforms drawn).
inline double sample_gauss(std::mt19937_64& g) {
  double u1;
  do {
    u1 = sample_uniform(g);
  } while (u1 == 0.0);
  const double u2 = sample_uniform(g);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline std::string rng_to_string(const std::mt19937_64& g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 g;
  std::istringstream is(s);
  is >> g;
  return g;
}

}  // namespace himo
