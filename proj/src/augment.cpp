#include "crest/augment.hpp"

#include "crest/errors.hpp"

namespace crest {

void AugmentPolicy::validate() const {
  if (!(weak_sigma >= 0.0)) throw InvalidArgument("weak_sigma must be >= 0");
  if (!(strong_sigma >= weak_sigma)) throw InvalidArgument("strong_sigma must be >= weak_sigma");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) throw InvalidArgument("mask_rate must lie in [0, 1)");
}

AugmentPolicy AugmentPolicy::weak_for(double noise_sigma) {
  return AugmentPolicy{AugmentKind::weak, 0.1 * noise_sigma, 0.5 * noise_sigma, 0.2};
}

AugmentPolicy AugmentPolicy::strong_for(double noise_sigma) {
  return weak_for(noise_sigma).as(AugmentKind::strong);
}

std::vector<double> weak_augment(std::span<const double> x, const AugmentPolicy& policy,
                                 RngStream& rng) {
  if (policy.kind != AugmentKind::weak) throw InvalidArgument("weak_augment needs a weak policy");
  std::vector<double> out(x.size());
  weak_augment_into(x, policy, rng, std::span<double>(out));
  return out;
}

std::vector<double> strong_augment(std::span<const double> x, const AugmentPolicy& policy,
                                   RngStream& rng) {
  if (policy.kind != AugmentKind::strong) {
    throw InvalidArgument("strong_augment needs a strong policy");
  }
  std::vector<double> out(x.size());
  strong_augment_into(x, policy, rng, std::span<double>(out));
  return out;
}

}  // namespace crest
