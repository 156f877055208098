#pragma once

// Counter-based normal variates. Draw `k` of substream `i` under master seed
// `s` is a pure function of (s, stream id, i, k), so trajectories can be
// advanced in any order, on any number of workers, and resumed later without
// replaying earlier draws.

#include <array>
#include <cmath>
#include <cstdint>

#include "qct/common.hpp"

namespace qct {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{M0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{M1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Named substreams; all randomness in a run flows from one master seed.
enum class Stream : std::uint32_t { Ensemble = 1, Lyapunov = 2, Cumulants = 3, Bootstrap = 4, Sampling = 5 };

class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, Stream stream, std::uint64_t index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        index_(index),
        stream_(static_cast<std::uint32_t>(stream)) {}

  /// Two independent uniforms in (0, 1) from 64 bits each.
  std::array<double, 2> uniform_pair(std::uint64_t counter) const {
    const auto r = philox4x32({static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                               static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32) ^ (stream_ << 24)},
                              key_);
    const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
    const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
    constexpr double scale = 0x1.0p-53;
    return {(static_cast<double>(a >> 11) + 0.5) * scale, (static_cast<double>(b >> 11) + 0.5) * scale};
  }

  /// Box-Muller pair of standard normals for block `counter`.
  std::array<double, 2> normal_pair(std::uint64_t counter) const {
    const auto u = uniform_pair(counter);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double a = 2.0 * pi * u[1];
    return {r * std::cos(a), r * std::sin(a)};
  }

  /// k-th standard normal of this substream.
  double normal(std::uint64_t k) const { return normal_pair(k >> 1)[k & 1]; }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t index_;
  std::uint32_t stream_;
};

}  // namespace qct
