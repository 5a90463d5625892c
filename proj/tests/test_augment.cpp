#include <doctest.h>

#include <cmath>

#include "crest/augment.hpp"
#include "crest/errors.hpp"

using namespace crest;

namespace {

// Returns fixed draws so masking decisions can be forced.
struct StubSource {
  double u = 0.0;
  double n = 0.0;
  double uniform() { return u; }
  double normal() { return n; }
};

}  // namespace

TEST_CASE("zero noise and no mask is the identity") {
  const std::vector<double> x{1.5, -2.0, 0.0, 3.25};
  RngStream rng(1);
  AugmentPolicy p{AugmentKind::weak, 0.0, 0.0, 0.0};
  CHECK(weak_augment(x, p, rng) == x);
  CHECK(strong_augment(x, p.as(AugmentKind::strong), rng) == x);
}

TEST_CASE("augmentation is a pure function of the stream") {
  const std::vector<double> x{0.1, 0.2, 0.3};
  const AugmentPolicy p;
  RngStream a(77), b(77);
  CHECK(weak_augment(x, p, a) == weak_augment(x, p, b));
  const auto s = p.as(AugmentKind::strong);
  CHECK(strong_augment(x, s, a) == strong_augment(x, s, b));
  RngStream c(78);
  CHECK_FALSE(weak_augment(x, p, a) == weak_augment(x, p, c));
}

TEST_CASE("weak views are centered on the input") {
  const std::vector<double> x{2.0, -1.0};
  const double sigma = 0.3;
  const AugmentPolicy p{AugmentKind::weak, sigma, 0.5, 0.2};
  RngStream rng(5);
  const int n = 100000;
  std::vector<double> sum(2, 0.0);
  double sq0 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto v = weak_augment(x, p, rng);
    for (std::size_t k = 0; k < 2; ++k) sum[k] += v[k] - x[k];
    sq0 += (v[0] - x[0]) * (v[0] - x[0]);
  }
  const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum[0] / n) < bound);
  CHECK(std::abs(sum[1] / n) < bound);
  CHECK(std::sqrt(sq0 / n) == doctest::Approx(sigma).epsilon(0.01));
}

TEST_CASE("strong mask fraction matches the mask rate") {
  const std::vector<double> x(100, 1.0);
  const AugmentPolicy p{AugmentKind::strong, 0.0, 0.0, 0.3};
  RngStream rng(11);
  long zeros = 0, total = 0;
  for (int i = 0; i < 1000; ++i) {
    for (double v : strong_augment(x, p, rng)) zeros += v == 0.0 ? 1 : 0;
    total += 100;
  }
  CHECK(std::abs(static_cast<double>(zeros) / static_cast<double>(total) - 0.3) <= 0.01);
}

TEST_CASE("stubbed stream: every coordinate masked") {
  const std::vector<double> x{4.0, 5.0, 6.0};
  std::vector<double> out(3, -1.0);
  StubSource src{0.0, 1.0};
  const AugmentPolicy p{AugmentKind::strong, 0.1, 0.5, 0.2};
  strong_augment_into(x, p, src, std::span<double>(out));
  CHECK(out == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("stubbed stream: no mask adds sigma times the normal draw") {
  const std::vector<double> x{4.0, 5.0};
  std::vector<double> out(2);
  StubSource src{0.99, 2.0};
  const AugmentPolicy p{AugmentKind::strong, 0.1, 0.5, 0.2};
  strong_augment_into(x, p, src, std::span<double>(out));
  CHECK(out[0] == doctest::Approx(5.0));
  CHECK(out[1] == doctest::Approx(6.0));
  weak_augment_into(x, p, src, std::span<double>(out));
  CHECK(out[0] == doctest::Approx(4.2));
}

TEST_CASE("policy validation and kind checks") {
  CHECK_THROWS_AS((AugmentPolicy{AugmentKind::weak, 0.6, 0.5, 0.2}).validate(), InvalidArgument);
  CHECK_THROWS_AS((AugmentPolicy{AugmentKind::weak, -0.1, 0.5, 0.2}).validate(), InvalidArgument);
  CHECK_THROWS_AS((AugmentPolicy{AugmentKind::weak, 0.1, 0.5, 1.0}).validate(), InvalidArgument);
  CHECK_NOTHROW(AugmentPolicy{}.validate());
  RngStream rng(1);
  const std::vector<double> x{1.0};
  CHECK_THROWS_AS(weak_augment(x, AugmentPolicy{}.as(AugmentKind::strong), rng), InvalidArgument);
  CHECK_THROWS_AS(strong_augment(x, AugmentPolicy{}, rng), InvalidArgument);
  const auto w = AugmentPolicy::weak_for(2.0);
  CHECK(w.weak_sigma == doctest::Approx(0.2));
  CHECK(w.strong_sigma == doctest::Approx(1.0));
  CHECK(AugmentPolicy::strong_for(2.0).kind == AugmentKind::strong);
}
