#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

namespace crimegat {

// SplitMix64 (Steele, Lea, Flood: "Fast splittable pseudorandom number
// generators"). Serves both as the core generator -- the workloads here draw
// at most a few million values -- and as the mixer that derives independent
// stream seeds from the single global seed, so every randomized stage is a
// pure function of (inputs, seed) with no platform-dependent library state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Stream k of global seed s is seeded with splitmix(s + k * gamma).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(seed + stream * 0x9e3779b97f4a7c15ULL).next();
}

// Stream tags used across the pipeline. Per-epoch training negatives use
// kEpochNegativesBase + epoch.
namespace streams {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kEdgeShuffle = 2;
inline constexpr std::uint64_t kNegatives = 3;
inline constexpr std::uint64_t kSbm = 4;
inline constexpr std::uint64_t kSvm = 5;
inline constexpr std::uint64_t kEpochNegativesBase = 1000;
}  // namespace streams

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_.next(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) via modulo rejection.
  std::size_t index(std::size_t bound) {
    const std::uint64_t b = bound;
    const std::uint64_t threshold = (0 - b) % b;
    std::uint64_t x = gen_.next();
    while (x < threshold) x = gen_.next();
    return static_cast<std::size_t>(x % b);
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  SplitMix64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace crimegat
