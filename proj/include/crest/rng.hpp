#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace crest {

/// Counter-based random stream. Each draw is a pure function of (key, counter),
/// so a stream's sequence never depends on how other streams are interleaved.
/// Sub-streams are derived by hashing a label into the key.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  [[nodiscard]] RngStream derive(std::string_view label) const {
    return from_key(mix(key_ ^ fnv1a(label)));
  }
  [[nodiscard]] RngStream derive(std::uint64_t index) const {
    return from_key(mix(key_ ^ mix(index + 0x3c6ef372fe94f82bULL)));
  }

  std::uint64_t next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two draws per value.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  static RngStream from_key(std::uint64_t key) {
    RngStream s;
    s.key_ = key;
    return s;
  }

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace crest
