#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crest/errors.hpp"
#include "crest/model.hpp"
#include "crest/rng.hpp"

using namespace crest;

namespace {

struct Batch {
  std::vector<double> rows;
  std::vector<int> labels;
  std::vector<double> weights;
};

Batch random_batch(std::size_t n, const ModelDims& dims, std::uint64_t seed) {
  RngStream rng(seed);
  Batch b;
  for (std::size_t i = 0; i < n * dims.input; ++i) b.rows.push_back(rng.normal());
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>(rng.below(dims.classes)));
    b.weights.push_back(0.5 + rng.uniform());
  }
  return b;
}

}  // namespace

TEST_CASE("init is seeded with zero biases") {
  const ModelDims dims{5, 8, 3};
  const auto a = init_model(dims, 1);
  CHECK(a == init_model(dims, 1));
  CHECK_FALSE(a.params == init_model(dims, 2).params);
  for (double b : a.params.b1()) CHECK(b == 0.0);
  for (double b : a.params.b2()) CHECK(b == 0.0);
  CHECK(a.step == 0);
  CHECK_THROWS_AS(init_model(ModelDims{0, 4, 2}, 1), InvalidArgument);
  CHECK_THROWS_AS(init_model(ModelDims{3, 4, 0}, 1), InvalidArgument);
}

TEST_CASE("zero parameters predict uniform") {
  const Parameters p(ModelDims{3, 4, 5});
  const std::vector<double> x{1.0, -2.0, 0.5};
  for (double v : predict_proba(p, x)) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("hand-built two-class logits give 0.75 / 0.25") {
  // One hidden unit copies x0 (>= 0); output logits are (ln 3 * h, 0).
  Parameters p(ModelDims{1, 1, 2});
  p.w1()[0] = 1.0;
  p.w2()[0] = std::log(3.0);
  const std::vector<double> x{1.0};
  const auto probs = predict_proba(p, x);
  CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax is shift invariant and sums to one") {
  RngStream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(7);
    for (double& v : z) v = 30.0 * rng.normal();
    std::vector<double> shifted = z;
    const double c = 100.0 * rng.normal();
    for (double& v : shifted) v += c;
    softmax_inplace(z);
    softmax_inplace(shifted);
    CHECK(std::accumulate(z.begin(), z.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t k = 0; k < z.size(); ++k) {
      CHECK(std::abs(z[k] - shifted[k]) <= 1e-12 * std::max(z[k], 1e-300) + 1e-300);
    }
  }
}

TEST_CASE("predict rows sum to one for random models and inputs") {
  const ModelDims dims{6, 16, 9};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = init_model(dims, seed);
    const auto b = random_batch(4, dims, seed + 100);
    const auto probs = predict_proba_batch(m.params, b.rows);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < dims.classes; ++k) s += probs[r * dims.classes + k];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(predict_proba(init_model(dims, 1).params, std::vector<double>(5)), InvalidArgument);
}

TEST_CASE("soft target equal to the prediction zeroes the output bias gradient") {
  const ModelDims dims{3, 4, 3};
  const auto m = init_model(dims, 9);
  const std::vector<double> x{0.3, -1.2, 0.8};
  const auto p = predict_proba(m.params, x);
  const std::vector<double> w{1.0};
  const auto lg = loss_and_grad_soft(m.params, x, p, w);
  for (double g : lg.grad.b2()) CHECK(std::abs(g) < 1e-15);
}

TEST_CASE("all-zero weights give zero loss and gradient") {
  const ModelDims dims{3, 4, 3};
  const auto m = init_model(dims, 9);
  const auto b = random_batch(5, dims, 1);
  const std::vector<double> zeros(5, 0.0);
  const auto lg = loss_and_grad(m.params, b.rows, b.labels, zeros);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad.values()) CHECK(g == 0.0);
}

TEST_CASE("loss_and_grad rejects NaN features and negative weights") {
  const ModelDims dims{2, 3, 2};
  const auto m = init_model(dims, 1);
  const std::vector<int> y{0};
  CHECK_THROWS_AS(loss_and_grad(m.params, std::vector<double>{NAN, 0.0}, y, std::vector<double>{1.0}),
                  InvalidArgument);
  CHECK_THROWS_AS(loss_and_grad(m.params, std::vector<double>{0.0, 0.0}, y, std::vector<double>{-1.0}),
                  InvalidArgument);
}

TEST_CASE("analytic gradient matches central differences") {
  SUBCASE("single example, d=3 h=4 L=3") {
    const ModelDims dims{3, 4, 3};
    const auto m = init_model(dims, 17);
    const auto b = random_batch(1, dims, 18);
    CHECK(grad_check(m.params, b.rows, b.labels, b.weights) < 1e-4);
  }
  SUBCASE("100 seeds at default hidden width") {
    const ModelDims dims{8, 64, 10};
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto m = init_model(dims, seed);
      const auto b = random_batch(3, dims, seed + 1000);
      worst = std::max(worst, grad_check(m.params, b.rows, b.labels, b.weights));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("grad_check flags a corrupted gradient") {
  const ModelDims dims{3, 4, 3};
  const auto m = init_model(dims, 5);
  const auto b = random_batch(2, dims, 6);
  auto analytic = loss_and_grad(m.params, b.rows, b.labels, b.weights).grad;
  const auto numeric = numeric_gradient(m.params, b.rows, b.labels, b.weights);
  const auto nonzero = static_cast<std::size_t>(
      std::find_if(analytic.values().begin(), analytic.values().end(), [](double g) { return std::abs(g) > 1e-6; }) -
      analytic.values().begin());
  REQUIRE(nonzero < analytic.size());
  analytic[nonzero] *= 2.0;
  CHECK(max_relative_error(analytic, numeric) > 1e-1);
}

TEST_CASE("grad_check on a degenerate zero model") {
  const Parameters p(ModelDims{3, 4, 3});
  const std::vector<double> rows(6, 0.0);
  const std::vector<int> labels{0, 2};
  const std::vector<double> w{1.0, 1.0};
  CHECK(grad_check(p, rows, labels, w) < 1e-4);
}

TEST_CASE("sgd step arithmetic") {
  Model m{Parameters(ModelDims{1, 1, 1}), 0};
  SgdState state{Parameters(m.dims())};
  SUBCASE("zero gradient without decay is a fixed point") {
    m.params[0] = 0.7;
    const Model before = m;
    sgd_step(m, state, Gradient(m.dims()), SgdSettings{0.1, 0.9, 0.0});
    CHECK(m.params == before.params);
    CHECK(m.step == 1);
  }
  SUBCASE("plain step") {
    m.params[0] = 1.0;
    Gradient g(m.dims());
    g[0] = 2.0;
    sgd_step(m, state, g, SgdSettings{0.1, 0.0, 0.0});
    CHECK(m.params[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("two momentum steps on a constant gradient") {
    const double theta0 = 0.5, g0 = 0.3, lr = 0.05;
    m.params[0] = theta0;
    Gradient g(m.dims());
    g[0] = g0;
    sgd_step(m, state, g, SgdSettings{lr, 0.9, 0.0});
    sgd_step(m, state, g, SgdSettings{lr, 0.9, 0.0});
    CHECK(m.params[0] == doctest::Approx(theta0 - lr * (g0 + (0.9 * g0 + g0))).epsilon(1e-14));
  }
  SUBCASE("weight decay enters the velocity") {
    m.params[0] = 2.0;
    sgd_step(m, state, Gradient(m.dims()), SgdSettings{0.1, 0.0, 0.5});
    CHECK(m.params[0] == doctest::Approx(2.0 - 0.1 * 1.0).epsilon(1e-15));
  }
  SUBCASE("non-finite gradient leaves the model untouched") {
    m.params[0] = 1.0;
    Gradient g(m.dims());
    g[1] = INFINITY;
    const Model before = m;
    CHECK_THROWS_AS(sgd_step(m, state, g, SgdSettings{}), TrainingError);
    CHECK(m == before);
  }
  SUBCASE("non-positive learning rate") {
    CHECK_THROWS_AS(sgd_step(m, state, Gradient(m.dims()), SgdSettings{0.0, 0.9, 0.0}), InvalidArgument);
  }
}

TEST_CASE("ema update") {
  Model m{Parameters(ModelDims{1, 1, 1}), 0};
  SUBCASE("scalar arithmetic") {
    EmaModel e = EmaModel::track(m, 0.9);
    e.shadow[0] = 1.0;
    m.params[0] = 0.0;
    ema_update(e, m);
    CHECK(e.shadow[0] == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("zero decay copies the model") {
    EmaModel e = EmaModel::track(m, 0.0);
    for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i] = 0.25 * static_cast<double>(i + 1);
    ema_update(e, m);
    CHECK(e.shadow == m.params);
  }
  SUBCASE("geometric convergence toward a constant model") {
    EmaModel e = EmaModel::track(m, 0.95);
    e.shadow[0] = 3.0;
    m.params[0] = -1.0;
    for (int k = 1; k <= 40; ++k) {
      ema_update(e, m);
      CHECK(std::abs(e.shadow[0] - (-1.0)) == doctest::Approx(std::pow(0.95, k) * 4.0).epsilon(1e-10));
    }
  }
  SUBCASE("shape mismatch") {
    EmaModel e = EmaModel::track(m, 0.9);
    const Model other{Parameters(ModelDims{2, 1, 1}), 0};
    CHECK_THROWS_AS(ema_update(e, other), InvalidArgument);
  }
  SUBCASE("shadow stays finite for a finite model") {
    const auto big = init_model(ModelDims{4, 8, 3}, 2);
    EmaModel e = EmaModel::track(big, 0.999);
    for (int k = 0; k < 1000; ++k) ema_update(e, big);
    CHECK(e.shadow.all_finite());
  }
}

TEST_CASE("json checkpoint round-trips bit-exactly") {
  Model m = init_model(ModelDims{5, 7, 4}, 33);
  m.step = 1234;
  m.params[3] = 1.0 / 3.0;
  m.params[4] = -5e-324;
  const auto back = load_model_json(save_model_json(m));
  CHECK(back == m);
  CHECK_THROWS_AS(load_model_json("{"), ParseError);
  CHECK_THROWS_AS(load_model_json(R"({"format":"crest-mlp","dims":{"input":1,"hidden":1,"classes":1},"step":0,"params":[1]})"),
                  InvalidArgument);
}
