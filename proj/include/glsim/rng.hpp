#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace glsim {

/// Philox4x32-10 counter-based block function (Salmon et al., Random123).
/// Maps a 128-bit counter and 64-bit key to 128 random bits.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) {
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

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a, used to turn substream names into stream ids.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Stream id for a named substream with an integer index (module/test/replica).
constexpr std::uint64_t substream(std::string_view name, std::uint64_t index = 0) {
  return splitmix64(hash_name(name) ^ splitmix64(index + 1));
}

namespace detail {

inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  // 53 random bits mapped to the open interval (0, 1).
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline std::array<double, 2> box_muller(double u1, double u2) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

inline Philox4x32::Key make_key(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t k = splitmix64(seed ^ splitmix64(stream ^ 0x5851F42D4C957F2Dull));
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

}  // namespace detail

/// Gaussian increments addressed by (site, step). The same (seed, stream, site, step)
/// always yields the same value, so coupled chains can share noise without storing it.
class NoiseStream {
 public:
  NoiseStream() = default;
  NoiseStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), key_(detail::make_key(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double gaussian(std::uint64_t site, std::uint64_t step) const {
    return pair(site >> 1, step)[site & 1u];
  }

  /// Two independent normals for the site pair (2*pair_index, 2*pair_index + 1).
  std::array<double, 2> pair(std::uint64_t pair_index, std::uint64_t step) const {
    const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(pair_index),
                                     static_cast<std::uint32_t>(pair_index >> 32),
                                     static_cast<std::uint32_t>(step),
                                     static_cast<std::uint32_t>(step >> 32)};
    const auto out = Philox4x32::apply(ctr, key_);
    return detail::box_muller(detail::to_unit_open(out[0], out[1]),
                              detail::to_unit_open(out[2], out[3]));
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  Philox4x32::Key key_{};
};

/// Sequential engine over a Philox stream. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint32_t;

  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : key_(detail::make_key(seed, stream)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  /// Uniform on (0, 1).
  double uniform() {
    const auto hi = (*this)();
    const auto lo = (*this)();
    return detail::to_unit_open(hi, lo);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const auto z = detail::box_muller(u1, u2);
    spare_ = z[1];
    has_spare_ = true;
    return z[0];
  }

  /// Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>((std::uint64_t{(*this)()} * n) >> 32);
  }

 private:
  void refill() {
    buffer_ = Philox4x32::apply({static_cast<std::uint32_t>(counter_),
                                 static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
                                key_);
    ++counter_;
    pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t counter_ = 0;
  Philox4x32::Counter buffer_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace glsim
