#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bucketwatch {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: draw n is a pure function of (key, n), so any
// stream can be evaluated out of order or on any thread. Draw n equals
// the n-th output of a SplitMix64 generator whose state starts at key.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  // Independent child stream; used to give every trial/run its own key.
  static constexpr CounterRng split(std::uint64_t seed, std::uint64_t index) noexcept {
    return CounterRng(mix64(mix64(seed ^ 0x5851f42d4c957f2dULL) + (index + 1) * kGoldenGamma));
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * kGoldenGamma);
  }

  // Upper 32 bits; used for Bernoulli draws against 32-bit thresholds.
  constexpr std::uint32_t bits32(std::uint64_t counter) const noexcept {
    return static_cast<std::uint32_t>(bits(counter) >> 32);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller from draws (2k, 2k+1).
  double normal(std::uint64_t k) const noexcept {
    const double u1 = 1.0 - uniform(2 * k);  // (0, 1]
    const double u2 = uniform(2 * k + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, bound) by rejection; `counter` is advanced
  // past every draw consumed.
  std::uint64_t below(std::uint64_t bound, std::uint64_t& counter) const noexcept {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
      const std::uint64_t r = bits(counter++);
      if (r >= limit) return bound == 0 ? 0 : r % bound;
    }
  }

 private:
  std::uint64_t key_;
};

// Probability mapped onto the 32-bit draw space: a draw u "hits" iff
// u < threshold, which happens with probability threshold / 2^32.
inline std::uint64_t probability_threshold32(double probability) noexcept {
  if (!(probability > 0.0)) return 0;
  if (probability >= 1.0) return std::uint64_t{1} << 32;
  return static_cast<std::uint64_t>(std::llround(probability * 4294967296.0));
}

}  // namespace bucketwatch
