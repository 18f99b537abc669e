#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace tubewalk {

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Domain tags keep streams for different purposes disjoint even when they
/// share a master seed and counters.
enum class Stream : std::uint64_t {
  Environment = 1,
  Walk = 2,
  Xi = 3,
  Resample = 4,
  BrownianDrift = 5,
  RealizationSeed = 6,
};

/// Derives a stream key as a pure function of (master, tag, a, b).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                    std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t k = mix64(master ^ 0x5851f42d4c957f2dULL);
  k = mix64(k ^ static_cast<std::uint64_t>(tag));
  k = mix64(k ^ a);
  return mix64(k ^ (b * 0xd1b54a32d192ed03ULL));
}

/// Counter-based generator: output j of the stream is mix64(key + j * phi).
/// Satisfies UniformRandomBitGenerator so std distributions can be used.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double normal() { return normal_(*this); }

  double exponential() noexcept { return -std::log1p(-uniform()); }

  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(*this);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tubewalk
