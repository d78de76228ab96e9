#pragma once

#include <cmath>
#include <cstdint>

namespace sphclass {

// SplitMix64 (Steele/Lea/Flood; the core of java.util.SplittableRandom).
// The output sequence is a pure function of the 64-bit seed and identical on
// every platform, and independent streams can be derived cheaply, which is
// what the augmentation pipeline needs for reproducible datasets.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0,n); rejection sampling, no modulo bias.
  std::uint64_t next_index(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller. The spare value is discarded so the
  // sequence stays a pure function of the number of draws.
  double next_normal() {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  std::uint64_t state_;
};

// Independent stream for (base seed, stream id). Two mixing rounds keep
// nearby ids decorrelated.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  SplitMix64 g(base ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
  g.next_u64();
  return g.next_u64();
}

}  // namespace sphclass
