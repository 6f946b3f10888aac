#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace snipe {

/// One step of the splitmix64 sequence. Used for key derivation and for
/// seeding the main generator; never used to produce simulation variates
/// directly.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless 64-bit mix of (key, counter). Handy for per-pair randomness in
/// graph generation where a fixed iteration order would serialize the work.
inline std::uint64_t mix64(std::uint64_t key, std::uint64_t counter) {
  std::uint64_t s = key ^ (counter * 0x9e3779b97f4a7c15ULL);
  return splitmix64_next(s);
}

/// xoshiro256++ pseudo-random generator with convenience distributions.
///
/// Streams are derived from a master seed plus an ordered list of key parts
/// (sweep index, replicate index, purpose tag, ...) so that every replicate
/// and purpose owns a distinct, schedule-independent stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  /// Derive an independent stream from (seed, part_1, part_2, ...).
  static Rng from_key(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> parts) {
    std::uint64_t st = seed;
    (void)splitmix64_next(st);
    for (std::uint64_t part : parts) {
      st ^= (part + 1) * 0xbf58476d1ce4e5b9ULL;
      (void)splitmix64_next(st);
    }
    Rng r(0);
    r.reseed_from_state(st);
    return r;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the paired variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed) {
    std::uint64_t st = seed;
    (void)splitmix64_next(st);
    reseed_from_state(st);
  }

  void reseed_from_state(std::uint64_t st) {
    for (auto& word : s_) word = splitmix64_next(st);
    // xoshiro's all-zero state is absorbing; splitmix cannot emit four zeros
    // in a row, but guard anyway.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    has_spare_ = false;
  }

  std::uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Purpose tags separating the random streams consumed by one replicate.
enum class StreamPurpose : std::uint64_t {
  kCovariates = 1,
  kGraph = 2,
  kCoefficients = 3,
  kTreatment = 4,
};

/// Stream for (master seed, sweep point, replicate, purpose). Replicates and
/// purposes never share a stream, so results do not depend on scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t sweep_index,
                       std::uint64_t rep_index, StreamPurpose purpose) {
  return Rng::from_key(
      seed, {sweep_index, rep_index, static_cast<std::uint64_t>(purpose)});
}

}  // namespace snipe
