#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace levyspec {

/// Philox4x64-10 counter-based generator.
///
/// Counter-based means the stream is a pure function of (key, counter): trials
/// can be assigned disjoint streams up front and produce identical output no
/// matter how many worker threads consume them, which is what makes experiment
/// reports reproducible across worker counts. Output matches numpy's
/// numpy.random.Philox for the same key/counter.
class Philox4x64 {
 public:
  using u64 = std::uint64_t;

  Philox4x64(u64 key0, u64 key1) : key_{key0, key1}, counter_{0, 0, 0, 0} {}

  /// Jump to an arbitrary 256-bit counter position (little-endian words).
  /// Following numpy's convention, the next block is the encryption of
  /// counter + 1, so an engine at counter c reproduces numpy's
  /// Philox(counter=c) output stream.
  void set_counter(const std::array<u64, 4>& c) { counter_ = c; }

  /// Next 256-bit block as four 64-bit words; the counter is incremented
  /// first and the new value encrypted (numpy's ordering).
  std::array<u64, 4> next_block() {
    increment_counter();
    std::array<u64, 4> ctr = counter_;
    std::array<u64, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = round_once(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr u64 kMult0 = 0xD2E7470EE14C6C93ULL;
  static constexpr u64 kMult1 = 0xCA5A826395121157ULL;
  static constexpr u64 kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr u64 kWeyl1 = 0xBB67AE8584CAA73BULL;

  static std::array<u64, 4> round_once(const std::array<u64, 4>& c,
                                       const std::array<u64, 2>& k) {
    const unsigned __int128 p0 = static_cast<unsigned __int128>(c[0]) * kMult0;
    const unsigned __int128 p1 = static_cast<unsigned __int128>(c[2]) * kMult1;
    const u64 lo0 = static_cast<u64>(p0), hi0 = static_cast<u64>(p0 >> 64);
    const u64 lo1 = static_cast<u64>(p1), hi1 = static_cast<u64>(p1 >> 64);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void increment_counter() {
    for (int i = 0; i < 4; ++i) {
      if (++counter_[i] != 0) break;  // propagate carry
    }
  }

  std::array<u64, 2> key_;
  std::array<u64, 4> counter_;
};

/// Seedable, splittable random stream on top of Philox4x64-10.
///
/// (seed, stream) form the Philox key, so `Rng(seed).stream(i)` for distinct i
/// are statistically independent streams of the same seeded family. All
/// derived variates are deterministic functions of the stream.
class Rng {
 public:
  static constexpr const char* kGeneratorName = "philox4x64-10";

  explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), engine_(seed, stream_id) {}

  /// Independent child stream of the same seed.
  Rng stream(std::uint64_t idx) const { return Rng(seed_, idx); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    if (index_ == 4) {
      block_ = engine_.next_block();
      index_ = 0;
    }
    return block_[index_++];
  }

  /// Uniform on the open interval (0, 1); never returns an endpoint, so it is
  /// safe inside logs.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; generates two at a time and caches one.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform01()));
    const double t = 6.283185307179586476925286766559 * uniform01();
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  double exponential() { return -std::log(uniform01()); }

  /// Fair sign, +1 or -1.
  double sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  Philox4x64 engine_;
  std::array<std::uint64_t, 4> block_{};
  int index_ = 4;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace levyspec
