#pragma once

#include <cmath>
#include <cstdint>

namespace hoist {

// splitmix64-based generator with hand-rolled distributions so that streams
// are bit-identical across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  int below(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  int range(int lo, int hi_inclusive) { return lo + below(hi_inclusive - lo + 1); }

  bool chance(double p) { return uniform() < p; }

  // Box-Muller; caches the second deviate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derive an independent stream, e.g. one per clip or per parameter group.
  static uint64_t derive(uint64_t seed, uint64_t salt) {
    Rng r(seed ^ (0x5851f42d4c957f2dull * (salt + 1)));
    r.next_u64();
    return r.next_u64();
  }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hoist
