#pragma once

#include <cstdint>

namespace sage {

/// Counter-based SplitMix64 stream.
///
/// A stream is keyed by (seed, index, tag): the starting state is
///   key = mix(seed ^ mix(index ^ mix(tag)))
/// and draw n (n = 1, 2, ...) returns mix(key + n * 0x9E3779B97F4A7C15),
/// where mix is the SplitMix64 finalizer. Every distribution below is
/// written out explicitly so that a corpus is reproducible bit-for-bit on
/// any platform; the std:: distributions are implementation-defined.
class CounterRng {
 public:
  static constexpr const char* kName = "splitmix64-counter/v1";
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  CounterRng(std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

  static std::uint64_t mix(std::uint64_t z) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer on [0, bound) by rejection (no modulo bias). bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;
  /// Standard normal by Box-Muller (cosine branch only, one normal per two draws).
  double normal() noexcept;
  /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the U^(1/shape) boost.
  double gamma(double shape) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags used by the synthetic world.
enum class StreamTag : std::uint64_t {
  Prototypes = 1,
  Placement = 2,
  RegionWeights = 3,
  EmbeddingNoise = 4,
  Label = 5,
  RandomComposer = 6,
};

}  // namespace sage
