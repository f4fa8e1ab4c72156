// SPDX-License-Identifier: MIT
#include "linkquant/rng.hpp"

#include <cmath>
#include <numbers>

namespace linkquant::rng {

namespace {

constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMult1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;  // golden ratio
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;  // sqrt(3) - 1

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  const unsigned __int128 p =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline std::array<std::uint64_t, 4> round_once(
    const std::array<std::uint64_t, 4>& x,
    const std::array<std::uint64_t, 2>& k) {
  std::uint64_t hi0, lo0, hi1, lo1;
  mulhilo(kMult0, x[0], hi0, lo0);
  mulhilo(kMult1, x[2], hi1, lo1);
  return {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                        std::array<std::uint64_t, 2> key) {
  counter = round_once(counter, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kWeyl0;
    key[1] += kWeyl1;
    counter = round_once(counter, key);
  }
  return counter;
}

GaussPair box_muller(std::uint64_t w1, std::uint64_t w2) {
  const double u1 = u01_open_closed(w1);
  const double u2 = u01_half_open(w2);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(theta), radius * std::sin(theta)};
}

void fill_standard_normal(const PhiloxStream& stream, std::uint64_t sampleIndex,
                          std::span<double> out) {
  const int dim = static_cast<int>(out.size());
  const std::uint64_t nblocks = blocks_per_sample(dim);
  const std::uint64_t base = sampleIndex * nblocks;

  int produced = 0;
  for (std::uint64_t b = 0; b < nblocks && produced < dim; ++b) {
    const auto words = stream.block(base + b);
    for (int pair = 0; pair < 2 && produced < dim; ++pair) {
      const GaussPair g = box_muller(words[2 * pair], words[2 * pair + 1]);
      out[produced++] = g.z0;
      if (produced < dim) out[produced++] = g.z1;
    }
  }
}

}  // namespace linkquant::rng
