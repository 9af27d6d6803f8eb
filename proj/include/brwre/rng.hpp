#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace brwre {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for replication `index` of a run keyed by `master`. Streams for
/// distinct (master, index) pairs are seeded from disjoint SplitMix64 outputs,
/// so results never depend on which worker ran which replication.
inline Rng substream(std::uint64_t master, std::uint64_t index) {
  const std::uint64_t a = mix64(master);
  const std::uint64_t b = mix64(a ^ mix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  // 53 random bits, shifted by half an ulp so that 0 is never returned.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal (ziggurat). The distribution object is stateless, so a draw
/// depends only on the generator state.
inline double standard_normal(Rng& rng) { return boost::random::normal_distribution<double>{}(rng); }

}  // namespace brwre
