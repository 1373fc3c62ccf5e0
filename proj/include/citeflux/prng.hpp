#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace citeflux {

// mt19937_64 is fully specified by the standard, so streams are identical on
// every platform. The std:: distributions are not; the draws below are
// hand-rolled for the same reason.
using Rng = std::mt19937_64;

// splitmix64 finalizer, used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable per-entity substream: hash the tag, mix with the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix64(base ^ mix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base ^ mix64(index + 0x51ed270b7a2fd9ULL));
}

// Uniform on [0, 1), 53-bit resolution.
inline double uniform01(Rng& g) noexcept {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& g, double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform01(g);
}

inline double exponential(Rng& g, double rate) noexcept {
  return -std::log1p(-uniform01(g)) / rate;
}

// Unbiased integer in [0, n); rejection keeps the modulus exact.
inline std::uint64_t uniform_index(Rng& g, std::uint64_t n) noexcept {
  const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
  std::uint64_t x = g();
  while (rem != 0 && x >= UINT64_MAX - rem + 1) x = g();
  return x % n;
}

// Box-Muller; consumes exactly two uniforms per call.
inline double normal(Rng& g) noexcept {
  const double u1 = 1.0 - uniform01(g);  // (0, 1]
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline double lognormal(Rng& g, double log_mean, double log_sigma) noexcept {
  return std::exp(log_mean + log_sigma * normal(g));
}

}  // namespace citeflux
