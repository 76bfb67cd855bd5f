#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace attest {

/// SplitMix64 output finalizer (Stafford's "Mix13" constants). A bijective
/// 64-bit avalanche function; also used as the trigram hash in the baseline.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Deterministic 64-bit generator: SplitMix64 (Steele, Lea & Flood 2014).
///
///   state += 0x9e3779b97f4a7c15; return mix64(state);
///
/// Every derived quantity is built from next_u64() with fixed recipes so a
/// dataset is reproducible from (seed, call order) on any platform that
/// rounds IEEE doubles the same way:
///   uniform()  = (x >> 11) * 2^-53
///   normal()   = Box-Muller on two uniforms, second variate cached
///   below(n)   = rejection sampling on the top of the 64-bit range
/// Substreams are keyed: Rng::stream(seed, k) starts from
/// mix64(seed ^ mix64(k + gamma)), so work indexed by k can run on any
/// thread and still reproduce the single-threaded output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t key) noexcept {
    return Rng(mix64(seed ^ mix64(key + kGoldenGamma)));
  }

  std::uint64_t next_u64() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_pos() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal variate.
  double normal() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t state() const noexcept { return state_; }

  // UniformRandomBitGenerator surface.
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Fisher-Yates shuffle with a fixed draw order (std::shuffle's is unspecified).
template <typename T>
void shuffle(std::span<T> items, Rng& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace attest
