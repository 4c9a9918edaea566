#pragma once

#include <cstdint>
#include <random>

namespace rdse {

using Rng = std::mt19937_64;

/// Roles that get independent random streams within one experiment.
enum class StreamRole : std::uint64_t {
  process = 1,
  measurement = 2,
  impulse = 3,
  initial = 4,
  optimizer = 5,
  measurement_impulse = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t experiment, StreamRole role) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ experiment);
  return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

inline Rng make_stream(std::uint64_t base_seed, std::uint64_t experiment, StreamRole role) {
  return Rng(stream_seed(base_seed, experiment, role));
}

}  // namespace rdse
