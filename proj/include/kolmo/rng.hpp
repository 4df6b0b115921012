#ifndef KOLMO_RNG_HPP_
#define KOLMO_RNG_HPP_

// Counter-based random streams built on Philox4x32-10.
//
// A stream is identified by (seed, stream_id). The seed is the Philox key; the
// 128-bit counter is split into a 64-bit block index (low words) and the
// 64-bit stream id (high words), so distinct streams never share a counter
// value and any block of any stream can be produced without coordination.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kolmo {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeylA;
        key[1] += kWeylB;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kWeylA = 0x9E3779B9;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85;
  static constexpr std::uint32_t kMulA = 0xD2511F53;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// SplitMix64 finalizer, used to derive child stream ids.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t block() const { return block_; }

  // Independent child stream; same seed, derived id.
  RngStream substream(std::uint64_t index) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(index + 1)));
  }

  // Jump to an absolute block position (each block yields 128 bits).
  void seek(std::uint64_t block) {
    block_ = block;
    avail_ = 0;
    have_spare_normal_ = false;
  }

  std::uint64_t next_u64() {
    if (avail_ == 0) refill();
    const std::uint64_t out = buffer_[2 - avail_];
    --avail_;
    return out;
  }

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard normal by Box-Muller; both variates of a pair are used.
  double normal() {
    if (have_spare_normal_) {
      have_spare_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    have_spare_normal_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto r = Philox4x32::generate(ctr, key);
    buffer_[0] = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    buffer_[1] = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
    avail_ = 2;
    ++block_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int avail_ = 0;
  double spare_normal_ = 0.0;
  bool have_spare_normal_ = false;
};

}  // namespace kolmo

#endif  // KOLMO_RNG_HPP_
