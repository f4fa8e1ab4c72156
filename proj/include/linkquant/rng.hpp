// SPDX-License-Identifier: MIT
//
// Counter-based pseudo-random number generation (Philox4x64, 10 rounds) and
// Gaussian sampling via the Box-Muller transform.
//
// A counter-based generator is a pure function (counter, key) -> block of
// random words.  Streams never carry hidden state, so any sample can be
// regenerated from its index alone.  This is what makes simulation output
// byte-reproducible regardless of how work is split across workers: worker
// layout changes the order of evaluation, never the values.
#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace linkquant::rng {

/// One Philox4x64-10 block: maps a 256-bit counter and a 128-bit key to
/// four 64-bit words.  Matches the widely deployed reference algorithm
/// (verified against an independent implementation in the test suite).
std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                        std::array<std::uint64_t, 2> key);

/// A logical random stream addressed by (seed, stream id).
///
/// Blocks are drawn by index; `lane` is a secondary index for callers that
/// need a two-dimensional addressing scheme (e.g. restart x iteration).
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : key_{seed, stream} {}

  std::array<std::uint64_t, 4> block(std::uint64_t index,
                                     std::uint64_t lane = 0) const {
    return philox4x64({index, lane, 0, 0}, key_);
  }

 private:
  std::array<std::uint64_t, 2> key_;
};

/// Uniform double in (0, 1] from one 64-bit word (53-bit resolution).
/// The half-open variant returns [0, 1).
inline double u01_open_closed(std::uint64_t w) {
  return static_cast<double>((w >> 11) + 1) * 0x1.0p-53;
}
inline double u01_half_open(std::uint64_t w) {
  return static_cast<double>(w >> 11) * 0x1.0p-53;
}

struct GaussPair {
  double z0;
  double z1;
};

/// Box-Muller transform of two uniform words into two independent N(0,1)
/// deviates.  u1 is taken in (0,1] so the logarithm is always finite.
GaussPair box_muller(std::uint64_t w1, std::uint64_t w2);

/// Number of Philox blocks consumed per sample of `dim` standard normals.
inline std::uint64_t blocks_per_sample(int dim) {
  const int pairs = (dim + 1) / 2;       // Box-Muller pairs needed
  return static_cast<std::uint64_t>((2 * pairs + 3) / 4);  // 4 words per block
}

/// Fills `out` with standard normal deviates for sample `sampleIndex` of the
/// given stream.  Addressing is purely by sample index, so evaluation order
/// (or sharding) cannot change the values.
void fill_standard_normal(const PhiloxStream& stream, std::uint64_t sampleIndex,
                          std::span<double> out);

}  // namespace linkquant::rng
