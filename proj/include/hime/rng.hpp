// Deterministic, splittable random generation. Sampler contracts require
// outputs that are a pure function of (seed, sample index) on every
// platform, so the generator is a hand-rolled splitmix64 stream rather than
// a std engine with implementation-defined distributions.
#pragma once

#include <cmath>
#include <cstdint>

#include "hime/common.hpp"

namespace hime {

namespace detail {
// splitmix64 finalizer (Stafford mix13): full-avalanche 64-bit hash.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// One independent stream per (seed, stream) pair; streams with distinct
// indices are decorrelated by the avalanche mix, so per-sample generators
// can be created in any order or in parallel.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : state_(detail::mix64(detail::mix64(seed) ^ detail::mix64(~stream))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Uniform on (0,1), endpoints excluded so log(u) is always finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by 128-bit multiply; bias < 2^-64 is
  // irrelevant at the sample counts used here.
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze; shape < 1 runs the
  // boost Gamma(shape+1)*U^(1/shape).
  double gamma(double shape) {
    if (!(shape > 0.0)) throw schema_error("gamma shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hime
