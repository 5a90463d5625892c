#pragma once

#include <concepts>
#include <span>
#include <vector>

#include "crest/rng.hpp"

namespace crest {

enum class AugmentKind { weak, strong };

/// Feature-space stand-in for image augmentation: weak views add a little
/// Gaussian noise, strong views add more noise and zero out coordinates.
struct AugmentPolicy {
  AugmentKind kind = AugmentKind::weak;
  double weak_sigma = 0.1;
  double strong_sigma = 0.5;
  double mask_rate = 0.2;

  /// Throws InvalidArgument unless strong_sigma >= weak_sigma >= 0 and
  /// mask_rate in [0, 1).
  void validate() const;

  /// Defaults relative to the generator noise scale.
  static AugmentPolicy weak_for(double noise_sigma);
  static AugmentPolicy strong_for(double noise_sigma);
  [[nodiscard]] AugmentPolicy as(AugmentKind k) const {
    AugmentPolicy p = *this;
    p.kind = k;
    return p;
  }
};

/// Anything with `double uniform()` and `double normal()`.
template <typename R>
concept RandomSource = requires(R r) {
  { r.uniform() } -> std::convertible_to<double>;
  { r.normal() } -> std::convertible_to<double>;
};

template <RandomSource R>
void weak_augment_into(std::span<const double> x, const AugmentPolicy& policy, R& rng,
                       std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = policy.weak_sigma == 0.0 ? x[i] : x[i] + policy.weak_sigma * rng.normal();
  }
}

template <RandomSource R>
void strong_augment_into(std::span<const double> x, const AugmentPolicy& policy, R& rng,
                         std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = policy.strong_sigma == 0.0 ? x[i] : x[i] + policy.strong_sigma * rng.normal();
    if (policy.mask_rate > 0.0 && rng.uniform() < policy.mask_rate) v = 0.0;
    out[i] = v;
  }
}

std::vector<double> weak_augment(std::span<const double> x, const AugmentPolicy& policy,
                                 RngStream& rng);
std::vector<double> strong_augment(std::span<const double> x, const AugmentPolicy& policy,
                                   RngStream& rng);

}  // namespace crest
