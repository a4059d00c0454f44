#pragma once

#include <cstdint>
#include <random>

namespace aimle {

using Rng = std::mt19937_64;

// Independent stream for (root seed, stream index). The engine is seeded with
// std::seed_seq over the four 32-bit halves {seed_lo, seed_hi, stream_lo,
// stream_hi}, so distinct pairs give unrelated streams and the same pair
// always reproduces the same sequence.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = dist(rng);
  while (u <= 0.0) u = dist(rng);
  return u;
}

}  // namespace aimle
