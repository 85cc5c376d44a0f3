#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace sigfolio {

/**
 * Counter-based random number generation (Philox4x32-10).
 *
 * Every stream is a pure function of a 64-bit key: block i of four 32-bit
 * words is philox(counter = i, key), so draws do not depend on platform
 * word size or on library-version distribution internals, and two streams
 * with distinct keys never overlap.  This is what makes frozen random
 * projections and simulated panels reproducible bit-for-bit from a seed.
 *
 * Draw order contract (relied upon by tests and documented consumers):
 *   - uniform() consumes two 32-bit words per call (53 random bits);
 *   - gaussian() consumes two uniforms per pair of normals (Box-Muller);
 *     normals are delivered in the order z0 = r*cos, z1 = r*sin;
 *   - matrix/vector fills proceed row-major: (0,0), (0,1), ..., (1,0), ...
 */
namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// One 4x32 block; matches the published Philox4x32-10 test vectors.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round != 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    const std::uint64_t prod0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t prod1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(prod0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(prod0);
    const auto hi1 = static_cast<std::uint32_t>(prod1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(prod1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

// SplitMix64 finalizer; used to turn (seed, purpose) into a well-mixed key.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/**
 * Purpose tags for deriving independent streams from one master seed.
 * Streams for different purposes share no draws even for equal seeds.
 */
inline constexpr std::uint64_t kStreamMarketShocks = 1;
inline constexpr std::uint64_t kStreamAugmentation = 2;
inline constexpr std::uint64_t kStreamProjections = 3;
inline constexpr std::uint64_t kStreamOptimizerStarts = 4;

/** Derives the Philox key for (seed, purpose). */
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t purpose) {
  return detail::splitmix64(seed ^ detail::splitmix64(purpose));
}

class RandomStream {
 public:
  /** Stream identified by a raw 64-bit key. */
  explicit RandomStream(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  /** Stream for a (seed, purpose) pair; see the purpose tags above. */
  RandomStream(std::uint64_t seed, std::uint64_t purpose)
      : RandomStream(stream_key(seed, purpose)) {}

  /** Next raw 32-bit word of the stream. */
  std::uint32_t next_u32() {
    if (word_ == 4) {
      buffer_ = detail::philox4x32_10(
          {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), 0u, 0u},
          key_);
      ++block_;
      word_ = 0;
    }
    return buffer_[word_++];
  }

  /** Uniform double in [0, 1) built from 53 random bits. */
  double uniform() {
    const std::uint32_t a = next_u32();
    const std::uint32_t b = next_u32();
    const double hi = static_cast<double>(a >> 5);   // 27 bits
    const double lo = static_cast<double>(b >> 6);   // 26 bits
    return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0);  // / 2^53
  }

  /** Standard normal draw (Box-Muller); exactly two uniforms per pair. */
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /** Fills a matrix or vector with N(mean, sd^2) draws in row-major order. */
  template <typename Derived>
  void fill_gaussian(Eigen::DenseBase<Derived>& m, double mean = 0.0, double sd = 1.0) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = mean + sd * gaussian();
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_ = 0;
  int word_ = 4;  // 4 = buffer exhausted
  std::array<std::uint32_t, 4> buffer_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sigfolio
