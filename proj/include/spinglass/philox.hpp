#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11) and the keyed
// streams built on it. Every draw is a pure function of (seed, counter), so
// results do not depend on evaluation order or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace spinglass {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Purpose tags occupy one counter word so different uses never share a block.
enum class StreamTag : std::uint32_t {
  disorder = 1,
  uniform_config = 2,
  band_config = 3,
  test = 4,
  scratch = 5,
};

namespace detail {

inline PhiloxKey key_of(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Open interval (0,1) with 53 random bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline std::array<double, 2> box_muller(double u1, double u2) {
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace detail

/// Standard normal determined entirely by (seed, tag, a, b). Counter layout
/// matches PhiloxStream with the tag in the same word, so tags never collide.
inline double keyed_normal(std::uint64_t seed, StreamTag tag, std::uint32_t a, std::uint64_t b) {
  const auto out = philox4x32_10(
      {static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(tag), a, static_cast<std::uint32_t>(b >> 32)},
      detail::key_of(seed));
  return detail::box_muller(detail::to_unit(out[0], out[1]), detail::to_unit(out[2], out[3]))[0];
}

/// Sequential stream (seed, tag, id): successive blocks are counters 0, 1, 2, ...
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, StreamTag tag, std::uint64_t id)
      : key_(detail::key_of(seed)),
        tag_(static_cast<std::uint32_t>(tag)),
        id_lo_(static_cast<std::uint32_t>(id)),
        id_hi_(static_cast<std::uint32_t>(id >> 32)) {}

  double uniform() {
    if (pos_ == 2) refill();
    return uniforms_[pos_++];
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const auto z = detail::box_muller(u1, u2);
    spare_ = z[1];
    have_spare_ = true;
    return z[0];
  }

 private:
  void refill() {
    // Counter layout: block index, tag, id low, id high.
    const auto out = philox4x32_10({block_++, tag_, id_lo_, id_hi_}, key_);
    uniforms_ = {detail::to_unit(out[0], out[1]), detail::to_unit(out[2], out[3])};
    pos_ = 0;
  }

  PhiloxKey key_;
  std::uint32_t tag_;
  std::uint32_t id_lo_;
  std::uint32_t id_hi_;
  std::uint32_t block_ = 0;
  std::array<double, 2> uniforms_{};
  int pos_ = 2;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spinglass
