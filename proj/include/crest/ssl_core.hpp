#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crest/augment.hpp"
#include "crest/data.hpp"
#include "crest/model.hpp"
#include "crest/rebalance.hpp"
#include "crest/rng.hpp"

namespace crest {

enum class AlignmentMode { off, constant, scheduled };

struct SslConfig {
  double threshold = 0.95;
  double lambda_u = 1.0;
  int steps = 2000;
  std::size_t batch_labeled = 64;
  std::size_t unlabeled_ratio = 7;
  std::size_t hidden = 64;
  SgdSettings sgd;
  double ema_decay = 0.999;
  /// Ramp the EMA decay as min(decay, (1 + k) / (10 + k)) so short runs are not
  /// dominated by the initial weights.
  bool ema_warmup = true;
  double marginal_decay = 0.99;
  AlignmentMode alignment = AlignmentMode::off;
  /// weak_sigma / strong_sigma / mask_rate; `kind` is ignored.
  AugmentPolicy augment;
  /// Draw labeled batches with probability proportional to 1/N_l (RS baseline).
  bool resample_labeled = false;

  void validate() const;
  [[nodiscard]] std::size_t batch_unlabeled() const { return batch_labeled * unlabeled_ratio; }
};

struct PseudoLabel {
  std::size_t index = 0;  // row in the unlabeled set
  int label = 0;
  double confidence = 0.0;
  std::vector<double> refined;
};

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> v);

/// Accepted iff max(refined) >= threshold; the hard label is the argmax.
std::optional<PseudoLabel> make_pseudo_label(std::span<const double> refined, double threshold,
                                             std::size_t index = 0);

/// Training rows with provenance: original labeled examples or pseudo-labeled
/// rows copied from the unlabeled set.
struct LabeledPool {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<bool> pseudo;
  std::vector<std::size_t> source_index;  // row in X (original) or U (pseudo)

  static LabeledPool from_dataset(const Dataset& d);
  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  [[nodiscard]] std::vector<long> class_counts() const;
};

/// A batch of rows; `ids` key each row's augmentation stream, so per-example
/// noise does not depend on position within the batch.
struct Batch {
  std::span<const double> rows;
  std::span<const std::size_t> ids;
};

struct TrainerState {
  Model model;
  SgdState sgd;
  EmaModel ema;
  MarginalState marginal;

  static TrainerState fresh(ModelDims dims, const SslConfig& cfg, std::uint64_t seed);
};

struct StepStats {
  long step = 0;
  double loss_s = 0.0;
  double loss_u = 0.0;
  double accept_rate = 0.0;
  double t = 1.0;
  double lr = 0.0;
};

/// One optimizer step of supervised CE on weak labeled views plus the
/// thresholded consistency loss between weak and strong unlabeled views.
/// `target` null disables alignment. Updates model, EMA and marginal.
StepStats ssl_step(TrainerState& state, Batch labeled, std::span<const int> labels,
                   Batch unlabeled, const SslConfig& cfg, const TargetDistribution* target,
                   double lr, const RngStream& rng);

struct GenerationResult {
  Model model;
  EmaModel ema;
  MarginalState marginal;
  std::vector<StepStats> log;
};

/// Trains a fresh model for cfg.steps SSL steps over seeded batch streams with
/// a cosine learning-rate decay. `base_distribution` is p(y) for alignment and
/// `temperature` its scaling for this generation.
GenerationResult train_generation(const LabeledPool& labeled, const Dataset& unlabeled,
                                  const SslConfig& cfg, std::span<const double> base_distribution,
                                  double temperature, std::uint64_t seed);

/// lr * 0.5 * (1 + cos(pi * step / steps))
double cosine_lr(double base_lr, long step, long steps);

/// CSV with columns step,loss_s,loss_u,accept_rate,t,lr.
std::string format_training_log(std::span<const StepStats> log);

}  // namespace crest
