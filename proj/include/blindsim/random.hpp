#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace blindsim {

/// Counter-based random stream.
///
/// Output i of a stream is a pure function of (key, i), so a stream can be
/// derived for any (master seed, trial index, module tag) triple without
/// touching any other stream. The mixing function is the SplitMix64
/// finalizer; the stream satisfies UniformRandomBitGenerator.
class RandomStream {
public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key = 0) : key_{mix(key)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() { return mix(key_ + kGamma * ++counter_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Exponential variate with the given mean.
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  /// Independent child stream identified by a numeric tag.
  [[nodiscard]] RandomStream split(std::uint64_t tag) const {
    RandomStream child;
    child.key_ = mix(key_ ^ mix(tag + kGamma));
    return child;
  }

  /// Independent child stream identified by a name ("detector", "attack", ...).
  [[nodiscard]] RandomStream split(std::string_view tag) const { return split(hash_tag(tag)); }

  [[nodiscard]] std::uint64_t key() const { return key_; }

  /// FNV-1a, used only to turn module tags into stream identifiers.
  static constexpr std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_{0};
  std::uint64_t counter_{0};
};

/// Stream for one trial of one module: (master seed, trial index, module tag).
inline RandomStream trial_stream(std::uint64_t master_seed, std::uint64_t trial_index,
                                 std::string_view module_tag) {
  return RandomStream{master_seed}.split(trial_index).split(module_tag);
}

} // namespace blindsim
