#pragma once

// Philox4x32-10 counter-based generator. Every Monte Carlo path draws from its
// own stream, keyed by the run seed and indexed by the path number, so results
// do not depend on how paths are distributed over threads.

#include <array>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>

#include "narrow_escape/common.hpp"

namespace narrow_escape {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Random stream of one path: counter = (path index, block index).
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path)),
        path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

  std::uint32_t next_u32() {
    if (used_ == 4) refill();
    return block_[used_++];
  }

  /// Uniform on the open interval (0, 1) with 32-bit resolution.
  double uniform() { return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32; }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform53() {
    const std::uint64_t hi = next_u32() >> 5;
    const std::uint64_t lo = next_u32() >> 6;
    return static_cast<double>((hi << 26) | lo) * 0x1p-53;
  }

  /// Standard normal variate (Boost's ziggurat sampler fed by this stream).
  double normal() {
    Engine engine{this};
    return normal_(engine);
  }

 private:
  void refill() {
    block_ = Philox4x32::generate({path_lo_, path_hi_, static_cast<std::uint32_t>(block_index_),
                                   static_cast<std::uint32_t>(block_index_ >> 32)},
                                  key_);
    ++block_index_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter block_{};
  int used_ = 4;
  boost::random::normal_distribution<double> normal_;

  // Uniform random bit generator view of the stream.
  struct Engine {
    PathStream* stream;
    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xffffffffu; }
    result_type operator()() { return stream->next_u32(); }
  };
};

}  // namespace narrow_escape
