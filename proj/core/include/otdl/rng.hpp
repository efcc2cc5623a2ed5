#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace otdl {

/// Seeded 64-bit random source. Every stochastic operation in the library
/// takes one of these explicitly, so a single-threaded run is reproducible
/// from its seed alone.
///
/// split() derives an independent child stream (one per worker, one per
/// evaluation pass) without consuming more than one draw from the parent.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    __extension__ typedef unsigned __int128 u128;
    return static_cast<std::uint64_t>((static_cast<u128>(engine_()) * n) >> 64);
  }

  Rng split() { return Rng(mix(engine_() ^ seed_)); }

  std::uint64_t seed() const { return seed_; }

  /// SplitMix64 finalizer, used to decorrelate nearby seeds.
  static constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace otdl
