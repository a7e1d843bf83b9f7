#pragma once

// Thin helpers over std::mt19937_64. The standard distributions are
// implementation-defined, so everything that feeds generated files or
// training goes through these to keep output identical across toolchains.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace blocknav::rng {

using Engine = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent per-item streams.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix(mix(base) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

inline double uniform01(Engine& e) {
  return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& e, double lo, double hi) {
  return lo + (hi - lo) * uniform01(e);
}

inline std::size_t uniform_index(Engine& e, std::size_t n) {
  return n == 0 ? 0 : static_cast<std::size_t>(e() % n);
}

inline int uniform_int(Engine& e, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(e, static_cast<std::size_t>(hi - lo + 1)));
}

inline bool bernoulli(Engine& e, double p) {
  return uniform01(e) < p;
}

// Box-Muller; one draw per call, the second variate is discarded.
inline double normal(Engine& e) {
  double u1 = uniform01(e);
  while (u1 <= 0.0) u1 = uniform01(e);
  const double u2 = uniform01(e);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <class T>
void shuffle(std::vector<T>& v, Engine& e) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(e, i)]);
  }
}

} // namespace blocknav::rng
