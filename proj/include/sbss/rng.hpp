#pragma once

#include <cstdint>
#include <limits>

namespace sbss {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based SplitMix64: the i-th output is mix64(key + i * golden),
/// a pure function of (key, i). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit SplitMix64(std::uint64_t key) noexcept : key_(key) {}

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Sub-stream key seed XOR hash(a, b).
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return seed ^ mix64(mix64(a + 0x632be59bd9b4e019ULL) + b * SplitMix64::kGolden);
}

}  // namespace sbss
