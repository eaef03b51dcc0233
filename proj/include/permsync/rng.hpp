#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a stream identified by
// (seed, a, b, role). Streams never share state, so the value drawn for one
// pair (j, k) does not depend on how many other pairs were visited before it,
// nor on which thread visited them.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace permsync {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Stream roles. Distinct roles on the same (seed, a, b) are independent.
enum class StreamRole : std::uint32_t {
  mask = 1,
  noise = 2,
  truth = 3,
  eigen_start = 4,
  cluster = 5,
  trial_seed = 6,
  sampling = 7,
};

/// A keyed stream over Philox. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint32_t a, std::uint32_t b, StreamRole role)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        a_(a),
        b_(b),
        role_(static_cast<std::uint32_t>(role)) {}

  explicit CounterRng(std::uint64_t seed) : CounterRng(seed, 0, 0, StreamRole::sampling) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (buffered_ == 0) refill();
    --buffered_;
    return buffer_[buffered_];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_positive() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the sine branch is cached for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_positive()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % bound;
  }

 private:
  void refill() {
    const auto out = philox4x32({a_, b_, role_, block_++}, key_);
    // Served back to front by operator().
    buffer_[1] = (std::uint64_t{out[1]} << 32) | out[0];
    buffer_[0] = (std::uint64_t{out[3]} << 32) | out[2];
    buffered_ = 2;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t a_;
  std::uint32_t b_;
  std::uint32_t role_;
  std::uint32_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent 64-bit seed from (master, a, b). Used for per-trial
/// and per-restart seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint32_t a, std::uint32_t b,
                                 StreamRole role = StreamRole::trial_seed) {
  CounterRng rng(master, a, b, role);
  return rng();
}

}  // namespace permsync
