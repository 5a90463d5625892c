#include "crest/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "crest/errors.hpp"
#include "crest/rng.hpp"

namespace crest {

bool Parameters::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

EmaModel EmaModel::track(const Model& model, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw InvalidArgument("EMA decay must lie in [0, 1)");
  return EmaModel{model.params, decay};
}

Model init_model(ModelDims dims, std::uint64_t seed) {
  if (dims.input == 0 || dims.hidden == 0 || dims.classes == 0) {
    throw InvalidArgument("model dims must be positive");
  }
  Model model{Parameters(dims), 0};
  RngStream rng = RngStream(seed).derive("init");
  const double bound1 = std::sqrt(6.0 / static_cast<double>(dims.input));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(dims.hidden + dims.classes));
  for (double& w : model.params.w1()) w = bound1 * (2.0 * rng.uniform() - 1.0);
  for (double& w : model.params.w2()) w = bound2 * (2.0 * rng.uniform() - 1.0);
  return model;
}

void softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

namespace {

void check_input(const ModelDims& dims, std::span<const double> x) {
  if (x.size() != dims.input) {
    throw InvalidArgument("feature dimension " + std::to_string(x.size()) +
                          " does not match model input " + std::to_string(dims.input));
  }
}

// Forward pass for one row; fills hidden pre-activations and logits.
void forward(const Parameters& p, std::span<const double> x, std::span<double> pre,
             std::span<double> z) {
  const auto& d = p.dims();
  const auto w1 = p.w1();
  const auto b1 = p.b1();
  for (std::size_t j = 0; j < d.hidden; ++j) {
    double acc = b1[j];
    const double* w = w1.data() + j * d.input;
    for (std::size_t i = 0; i < d.input; ++i) acc += w[i] * x[i];
    pre[j] = acc;
  }
  const auto w2 = p.w2();
  const auto b2 = p.b2();
  for (std::size_t k = 0; k < d.classes; ++k) {
    double acc = b2[k];
    const double* w = w2.data() + k * d.hidden;
    for (std::size_t j = 0; j < d.hidden; ++j) acc += w[j] * std::max(0.0, pre[j]);
    z[k] = acc;
  }
}

LossAndGrad weighted_ce(const Parameters& p, std::span<const double> rows, std::size_t n,
                        const auto& target_of, std::span<const double> weights) {
  const auto& d = p.dims();
  if (n == 0) throw InvalidArgument("batch must be nonempty");
  if (rows.size() != n * d.input) throw InvalidArgument("batch rows do not match model input");
  if (weights.size() != n) throw InvalidArgument("one weight per example required");
  for (double v : rows) {
    if (std::isnan(v)) throw InvalidArgument("NaN input feature");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidArgument("example weights must be >= 0");
  }

  LossAndGrad out{0.0, Gradient(d)};
  auto gw1 = out.grad.w1();
  auto gb1 = out.grad.b1();
  auto gw2 = out.grad.w2();
  auto gb2 = out.grad.b2();
  const auto w2 = p.w2();
  std::vector<double> pre(d.hidden), z(d.classes), target(d.classes), dz(d.classes),
      dpre(d.hidden);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t r = 0; r < n; ++r) {
    const double w = weights[r];
    if (w == 0.0) continue;
    const auto x = rows.subspan(r * d.input, d.input);
    forward(p, x, pre, z);
    target_of(r, std::span<double>(target));

    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double lse = top + std::log(sum);
    double mass = 0.0;
    double ce = 0.0;
    for (std::size_t k = 0; k < d.classes; ++k) {
      if (target[k] != 0.0) ce -= target[k] * (z[k] - lse);
      mass += target[k];
    }
    out.loss += w * inv_n * ce;

    const double scale = w * inv_n;
    for (std::size_t k = 0; k < d.classes; ++k) {
      dz[k] = scale * (mass * std::exp(z[k] - lse) - target[k]);
    }
    std::fill(dpre.begin(), dpre.end(), 0.0);
    for (std::size_t k = 0; k < d.classes; ++k) {
      gb2[k] += dz[k];
      const double* wrow = w2.data() + k * d.hidden;
      double* grow = gw2.data() + k * d.hidden;
      for (std::size_t j = 0; j < d.hidden; ++j) {
        grow[j] += dz[k] * std::max(0.0, pre[j]);
        dpre[j] += dz[k] * wrow[j];
      }
    }
    for (std::size_t j = 0; j < d.hidden; ++j) {
      if (pre[j] <= 0.0) continue;  // subgradient 0 at the kink
      gb1[j] += dpre[j];
      double* grow = gw1.data() + j * d.input;
      for (std::size_t i = 0; i < d.input; ++i) grow[i] += dpre[j] * x[i];
    }
  }
  return out;
}

}  // namespace

std::vector<double> logits(const Parameters& params, std::span<const double> x) {
  const auto& d = params.dims();
  check_input(d, x);
  std::vector<double> pre(d.hidden), z(d.classes);
  forward(params, x, pre, z);
  return z;
}

std::vector<double> predict_proba(const Parameters& params, std::span<const double> x) {
  auto z = logits(params, x);
  softmax_inplace(z);
  return z;
}

std::vector<double> predict_proba_batch(const Parameters& params, std::span<const double> rows) {
  const auto& d = params.dims();
  if (rows.size() % d.input != 0) throw InvalidArgument("batch rows do not match model input");
  const std::size_t n = rows.size() / d.input;
  std::vector<double> out(n * d.classes);
  std::vector<double> pre(d.hidden);
  for (std::size_t r = 0; r < n; ++r) {
    std::span<double> z(out.data() + r * d.classes, d.classes);
    forward(params, rows.subspan(r * d.input, d.input), pre, z);
    softmax_inplace(z);
  }
  return out;
}

LossAndGrad loss_and_grad(const Parameters& params, std::span<const double> rows,
                          std::span<const int> labels, std::span<const double> weights) {
  const auto classes = params.dims().classes;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("label " + std::to_string(y) + " out of range");
    }
  }
  auto one_hot = [&](std::size_t r, std::span<double> t) {
    std::fill(t.begin(), t.end(), 0.0);
    t[static_cast<std::size_t>(labels[r])] = 1.0;
  };
  return weighted_ce(params, rows, labels.size(), one_hot, weights);
}

LossAndGrad loss_and_grad_soft(const Parameters& params, std::span<const double> rows,
                               std::span<const double> targets, std::span<const double> weights) {
  const auto classes = params.dims().classes;
  if (targets.size() % classes != 0) throw InvalidArgument("soft targets must be n x classes");
  auto soft = [&](std::size_t r, std::span<double> t) {
    std::copy_n(targets.begin() + static_cast<std::ptrdiff_t>(r * classes), classes, t.begin());
  };
  return weighted_ce(params, rows, targets.size() / classes, soft, weights);
}

void sgd_step(Model& model, SgdState& state, const Gradient& grad, const SgdSettings& settings) {
  if (!(settings.lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(grad.dims() == model.dims())) throw InvalidArgument("gradient shape mismatch");
  if (!grad.all_finite()) throw TrainingError(model.step, "non-finite gradient");
  if (state.velocity.size() != model.params.size()) state.velocity = Parameters(model.dims());

  auto theta = model.params.values();
  auto v = state.velocity.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    v[i] = settings.momentum * v[i] + g[i] + settings.weight_decay * theta[i];
    theta[i] -= settings.lr * v[i];
  }
  ++model.step;
}

void ema_update(EmaModel& ema, const Model& model) { ema_update(ema, model, ema.decay); }

void ema_update(EmaModel& ema, const Model& model, double decay) {
  if (!(ema.shadow.dims() == model.dims())) throw InvalidArgument("EMA shape mismatch");
  auto shadow = ema.shadow.values();
  const auto theta = model.params.values();
  for (std::size_t i = 0; i < shadow.size(); ++i) {
    shadow[i] = decay * shadow[i] + (1.0 - decay) * theta[i];
  }
}

Gradient numeric_gradient(const Parameters& params, std::span<const double> rows,
                          std::span<const int> labels, std::span<const double> weights,
                          double step) {
  Parameters probe = params;
  Gradient out(params.dims());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = loss_and_grad(probe, rows, labels, weights).loss;
    probe[i] = saved - step;
    const double down = loss_and_grad(probe, rows, labels, weights).loss;
    probe[i] = saved;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

double max_relative_error(const Gradient& a, const Gradient& b) {
  if (a.size() != b.size()) throw InvalidArgument("gradient shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-12});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

double grad_check(const Parameters& params, std::span<const double> rows,
                  std::span<const int> labels, std::span<const double> weights) {
  const auto analytic = loss_and_grad(params, rows, labels, weights).grad;
  return max_relative_error(analytic, numeric_gradient(params, rows, labels, weights));
}

std::string save_model_json(const Model& model) {
  const auto& d = model.dims();
  nlohmann::json j;
  j["format"] = "crest-mlp";
  j["version"] = 1;
  j["dims"] = {{"input", d.input}, {"hidden", d.hidden}, {"classes", d.classes}};
  j["step"] = model.step;
  j["params"] = std::vector<double>(model.params.values().begin(), model.params.values().end());
  return j.dump();
}

Model load_model_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "crest-mlp") throw InvalidArgument("not a crest-mlp checkpoint");
    const auto& jd = j.at("dims");
    ModelDims dims{jd.at("input").get<std::size_t>(), jd.at("hidden").get<std::size_t>(),
                   jd.at("classes").get<std::size_t>()};
    const auto values = j.at("params").get<std::vector<double>>();
    if (values.size() != dims.parameter_count()) {
      throw InvalidArgument("checkpoint parameter count does not match dims");
    }
    Model m{Parameters(dims), j.at("step").get<long>()};
    std::copy(values.begin(), values.end(), m.params.values().begin());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace crest
