#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crest {

struct ModelDims {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  [[nodiscard]] std::size_t parameter_count() const {
    return hidden * input + hidden + classes * hidden + classes;
  }
  bool operator==(const ModelDims&) const = default;
};

/// Flat parameter buffer of the one-hidden-layer perceptron, laid out as
/// [W1 (hidden x input) | b1 (hidden) | W2 (classes x hidden) | b2 (classes)],
/// matrices row-major. Gradients and optimizer state share this layout.
class Parameters {
 public:
  Parameters() = default;
  explicit Parameters(ModelDims dims) : dims_(dims), values_(dims.parameter_count(), 0.0) {}

  [[nodiscard]] const ModelDims& dims() const { return dims_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> w1() { return values().subspan(0, dims_.hidden * dims_.input); }
  std::span<double> b1() { return values().subspan(b1_offset(), dims_.hidden); }
  std::span<double> w2() { return values().subspan(w2_offset(), dims_.classes * dims_.hidden); }
  std::span<double> b2() { return values().subspan(b2_offset(), dims_.classes); }
  [[nodiscard]] std::span<const double> w1() const { return values().subspan(0, dims_.hidden * dims_.input); }
  [[nodiscard]] std::span<const double> b1() const { return values().subspan(b1_offset(), dims_.hidden); }
  [[nodiscard]] std::span<const double> w2() const { return values().subspan(w2_offset(), dims_.classes * dims_.hidden); }
  [[nodiscard]] std::span<const double> b2() const { return values().subspan(b2_offset(), dims_.classes); }

  [[nodiscard]] bool all_finite() const;

  bool operator==(const Parameters&) const = default;

 private:
  [[nodiscard]] std::size_t b1_offset() const { return dims_.hidden * dims_.input; }
  [[nodiscard]] std::size_t w2_offset() const { return b1_offset() + dims_.hidden; }
  [[nodiscard]] std::size_t b2_offset() const { return w2_offset() + dims_.classes * dims_.hidden; }

  ModelDims dims_;
  std::vector<double> values_;
};

using Gradient = Parameters;

struct Model {
  Parameters params;
  long step = 0;

  [[nodiscard]] const ModelDims& dims() const { return params.dims(); }
  bool operator==(const Model&) const = default;
};

/// Shadow parameters tracked as an exponential moving average of a Model.
struct EmaModel {
  Parameters shadow;
  double decay = 0.999;

  static EmaModel track(const Model& model, double decay);
};

struct SgdSettings {
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct SgdState {
  Parameters velocity;
};

/// Uniform weights scaled by fan-in (hidden layer, rectifier) and fan-in +
/// fan-out (output layer); biases zero.
Model init_model(ModelDims dims, std::uint64_t seed);

/// Softmax class probabilities for one feature vector.
std::vector<double> predict_proba(const Parameters& params, std::span<const double> x);
/// Logits for one feature vector.
std::vector<double> logits(const Parameters& params, std::span<const double> x);
/// Row-major (n x classes) probabilities for a row-major (n x input) batch.
std::vector<double> predict_proba_batch(const Parameters& params, std::span<const double> rows);

/// Numerically stable softmax, in place.
void softmax_inplace(std::span<double> z);

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

/// Weighted cross-entropy, normalized by batch size: (1/n) * sum_i w_i * CE_i.
/// `rows` is row-major (n x input). Hard labels are class indices.
LossAndGrad loss_and_grad(const Parameters& params, std::span<const double> rows,
                          std::span<const int> labels, std::span<const double> weights);
/// Soft targets are row-major (n x classes).
LossAndGrad loss_and_grad_soft(const Parameters& params, std::span<const double> rows,
                               std::span<const double> targets, std::span<const double> weights);

/// v <- momentum * v + grad + weight_decay * theta;  theta <- theta - lr * v.
/// Throws TrainingError (model untouched) on a non-finite gradient.
void sgd_step(Model& model, SgdState& state, const Gradient& grad, const SgdSettings& settings);

/// shadow <- decay * shadow + (1 - decay) * theta, with decay = ema.decay.
void ema_update(EmaModel& ema, const Model& model);
/// Same update with an explicit decay for this step.
void ema_update(EmaModel& ema, const Model& model, double decay);

/// Central finite-difference gradient of the hard-label loss.
Gradient numeric_gradient(const Parameters& params, std::span<const double> rows,
                          std::span<const int> labels, std::span<const double> weights,
                          double step = 1e-5);
/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-12)
double max_relative_error(const Gradient& a, const Gradient& b);
/// Worst relative error between the analytic and finite-difference gradients.
double grad_check(const Parameters& params, std::span<const double> rows,
                  std::span<const int> labels, std::span<const double> weights);

/// JSON checkpoint: dims, step and parameters in shortest round-trip decimal.
std::string save_model_json(const Model& model);
Model load_model_json(const std::string& text);

}  // namespace crest
