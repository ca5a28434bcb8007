#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nvsim {

/// splitmix64 finalizer; used to derive well-mixed substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream addressed by (root seed, task path).
///
/// Every parallelizable kernel draws from a stream derived from the scenario
/// seed plus integer task indices (grid point, average, cell, ...), so results
/// do not depend on scheduling or worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t p : path) h = mix64(h ^ p);
    engine_.seed(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution. Hand-rolled so the mapping
  /// from engine output is fixed across standard-library implementations.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace nvsim
