#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace brw {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// One block of the Philox4x32-10 counter-based generator (Random123).
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

/// Stable 64-bit identifier for a suite or stream label (FNV-1a).
std::uint64_t stream_label(std::string_view name) noexcept;

/// A per-trial random stream.
///
/// The state is a pure function of (master seed, label, index): two Philox
/// blocks keyed by the master seed seed a xoshiro256** engine. Streams for
/// different trial indices never share state, so trial results do not depend
/// on which worker ran them or in what order.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t master_seed, std::uint64_t label, std::uint64_t index) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Exponential with the rate convention (mean 1 / rate).
  double exponential(double rate = 1.0) noexcept;

  /// Standard normal (Marsaglia polar method).
  double normal() noexcept;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace brw
