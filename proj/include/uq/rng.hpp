#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace uq {

// Counter-based pseudo-random generator. Every draw is a pure function of
// (seed, stream, counter), so rows can be generated out of order, sharded
// across workers, or subset without changing any value. The mixer is the
// splitmix64 finalizer applied to a keyed combination of the three inputs.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t at(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ (stream + 1) * 0xc2b2ae3d27d4eb4fULL);
  h = mix64(h ^ (counter + 1) * 0x9e3779b97f4a7c15ULL);
  return h;
}

// Derive a child seed, e.g. per test case or per dataset row.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ mix64(key));
}

// Stable 64-bit FNV-1a; used to key RNGs by string ids across platforms.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double to_unit(std::uint64_t bits) {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace rng

// Stateful view over the counter-based generator: fixed (seed, stream),
// advancing counter. Copyable, trivially restartable.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() { return rng::at(seed_, stream_, counter_++); }

  // Uniform in [0, 1).
  double uniform() { return rng::to_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two counters per pair and
  // caches the second value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace uq
