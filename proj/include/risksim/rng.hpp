#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace risksim {

/// Philox4x32-10 counter-based generator: the output is a pure function of
/// (key, counter), so any stream position can be computed independently.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  static constexpr Block generate(Block counter, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * counter[0];
      const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * counter[2];
      counter = {std::uint32_t(p1 >> 32) ^ counter[1] ^ key[0], std::uint32_t(p1),
                 std::uint32_t(p0 >> 32) ^ counter[3] ^ key[1], std::uint32_t(p0)};
    }
    return counter;
  }
};

/// Standard normals addressed by (seed, stream, step, index). Two normals per
/// Philox block via Box-Muller.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(stream) {}

  double operator()(std::uint64_t step, std::uint32_t index) const {
    const auto pair = normal_pair(step, index / 2);
    return pair[index % 2];
  }

  std::array<double, 2> normal_pair(std::uint64_t step, std::uint32_t block) const {
    const auto bits = Philox4x32::generate(
        {std::uint32_t(step), lane(step, block, false), std::uint32_t(stream_), std::uint32_t(stream_ >> 32)},
        key_);
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (double((std::uint64_t(bits[0]) << 21) ^ (bits[1] >> 11)) + 1.0) * 0x1.0p-53;
    const double u2 = double((std::uint64_t(bits[2]) << 21) ^ (bits[3] >> 11)) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Uniform in [0, 1).
  double uniform(std::uint64_t step, std::uint32_t index) const {
    const auto bits = Philox4x32::generate(
        {std::uint32_t(step), lane(step, index, true), std::uint32_t(stream_), std::uint32_t(stream_ >> 32)},
        key_);
    return double((std::uint64_t(bits[0]) << 21) ^ (bits[1] >> 11)) * 0x1.0p-53;
  }

 private:
  // Counter word 1: step bits 32..39, lane index in bits 8..30, bit 31 tags uniforms.
  static constexpr std::uint32_t lane(std::uint64_t step, std::uint32_t index, bool uniform) {
    return (std::uint32_t(step >> 32) & 0xFFu) | ((index & 0x7FFFFFu) << 8) | (uniform ? 0x80000000u : 0u);
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
};

}  // namespace risksim
