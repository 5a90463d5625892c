#include "crest/ssl_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "crest/errors.hpp"

namespace crest {

void SslConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("ssl.threshold must lie in (0, 1]");
  if (!(lambda_u >= 0.0)) throw InvalidArgument("ssl.lambda_u must be >= 0");
  if (steps < 1) throw InvalidArgument("ssl.steps must be >= 1");
  if (batch_labeled < 1) throw InvalidArgument("ssl.batch_labeled must be >= 1");
  if (unlabeled_ratio < 1) throw InvalidArgument("ssl.unlabeled_ratio must be >= 1");
  if (hidden < 1) throw InvalidArgument("ssl.hidden must be >= 1");
  if (!(sgd.lr > 0.0)) throw InvalidArgument("ssl.lr must be positive");
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) throw InvalidArgument("ssl.momentum must lie in [0, 1)");
  if (!(sgd.weight_decay >= 0.0)) throw InvalidArgument("ssl.weight_decay must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw InvalidArgument("ssl.ema_decay must lie in [0, 1)");
  if (!(marginal_decay >= 0.0 && marginal_decay < 1.0)) {
    throw InvalidArgument("ssl.marginal_decay must lie in [0, 1)");
  }
  augment.validate();
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::optional<PseudoLabel> make_pseudo_label(std::span<const double> refined, double threshold,
                                             std::size_t index) {
  const std::size_t top = argmax(refined);
  if (!(refined[top] >= threshold)) return std::nullopt;
  return PseudoLabel{index, static_cast<int>(top), refined[top], {refined.begin(), refined.end()}};
}

LabeledPool LabeledPool::from_dataset(const Dataset& d) {
  LabeledPool pool{d.dim(), d.num_classes(), d.features(), d.labels(),
                   std::vector<bool>(d.size(), false), std::vector<std::size_t>(d.size())};
  std::iota(pool.source_index.begin(), pool.source_index.end(), 0);
  return pool;
}

std::vector<long> LabeledPool::class_counts() const {
  std::vector<long> counts(num_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

TrainerState TrainerState::fresh(ModelDims dims, const SslConfig& cfg, std::uint64_t seed) {
  Model model = init_model(dims, seed);
  EmaModel ema = EmaModel::track(model, cfg.ema_decay);
  return TrainerState{std::move(model), SgdState{Parameters(dims)}, std::move(ema),
                      MarginalState::uniform(dims.classes, cfg.marginal_decay)};
}

double cosine_lr(double base_lr, long step, long steps) {
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(steps)));
}

StepStats ssl_step(TrainerState& state, Batch labeled, std::span<const int> labels,
                   Batch unlabeled, const SslConfig& cfg, const TargetDistribution* target,
                   double lr, const RngStream& rng) {
  const ModelDims dims = state.model.dims();
  const std::size_t d = dims.input;
  const std::size_t n_l = labeled.ids.size();
  const std::size_t n_u = unlabeled.ids.size();
  if (n_l == 0 || n_u == 0) throw InvalidArgument("ssl_step needs nonempty batches");
  if (labeled.rows.size() != n_l * d || unlabeled.rows.size() != n_u * d ||
      labels.size() != n_l) {
    throw InvalidArgument("batch shape does not match model input");
  }
  const AugmentPolicy policy = cfg.augment;

  // Supervised term on weak views of the labeled batch.
  std::vector<double> weak_l(n_l * d);
  const RngStream lab_rng = rng.derive("labeled-weak");
  for (std::size_t i = 0; i < n_l; ++i) {
    RngStream s = lab_rng.derive(labeled.ids[i]);
    weak_augment_into(labeled.rows.subspan(i * d, d), policy, s,
                      std::span<double>(weak_l).subspan(i * d, d));
  }
  const std::vector<double> ones(n_l, 1.0);
  LossAndGrad sup = loss_and_grad(state.model.params, weak_l, labels, ones);

  // Pseudo-labels from weak views of the unlabeled batch.
  std::vector<double> weak_u(n_u * d);
  const RngStream weak_rng = rng.derive("unlabeled-weak");
  for (std::size_t i = 0; i < n_u; ++i) {
    RngStream s = weak_rng.derive(unlabeled.ids[i]);
    weak_augment_into(unlabeled.rows.subspan(i * d, d), policy, s,
                      std::span<double>(weak_u).subspan(i * d, d));
  }
  std::vector<double> q = predict_proba_batch(state.model.params, weak_u);
  const std::size_t classes = dims.classes;
  std::vector<double> batch_mean(classes, 0.0);
  for (std::size_t i = 0; i < n_u; ++i) {
    for (std::size_t k = 0; k < classes; ++k) batch_mean[k] += q[i * classes + k];
  }
  for (double& v : batch_mean) v /= static_cast<double>(n_u);

  std::vector<double> strong_rows;
  std::vector<int> hard;
  const RngStream strong_rng = rng.derive("unlabeled-strong");
  std::vector<double> refined(classes), view(d);
  for (std::size_t i = 0; i < n_u; ++i) {
    std::copy_n(q.begin() + static_cast<std::ptrdiff_t>(i * classes), classes, refined.begin());
    if (target != nullptr) align_inplace(refined, target->target(), state.marginal.probs);
    const auto pl = make_pseudo_label(refined, cfg.threshold, i);
    if (!pl) continue;
    RngStream s = strong_rng.derive(unlabeled.ids[i]);
    strong_augment_into(unlabeled.rows.subspan(i * d, d), policy, s, std::span<double>(view));
    strong_rows.insert(strong_rows.end(), view.begin(), view.end());
    hard.push_back(pl->label);
  }

  StepStats stats;
  stats.step = state.model.step;
  stats.loss_s = sup.loss;
  stats.accept_rate = static_cast<double>(hard.size()) / static_cast<double>(n_u);
  stats.t = target != nullptr ? target->temperature() : 1.0;
  stats.lr = lr;

  Gradient total = std::move(sup.grad);
  if (!hard.empty() && cfg.lambda_u > 0.0) {
    const std::vector<double> w(hard.size(), 1.0);
    LossAndGrad unsup = loss_and_grad(state.model.params, strong_rows, hard, w);
    stats.loss_u = unsup.loss;
    auto g = total.values();
    const auto gu = unsup.grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.lambda_u * gu[i];
  } else if (!hard.empty()) {
    const std::vector<double> w(hard.size(), 1.0);
    stats.loss_u = loss_and_grad(state.model.params, strong_rows, hard, w).loss;
  }
  if (!std::isfinite(stats.loss_s) || !std::isfinite(stats.loss_u)) {
    throw TrainingError(state.model.step, "non-finite loss");
  }

  sgd_step(state.model, state.sgd, total, SgdSettings{lr, cfg.sgd.momentum, cfg.sgd.weight_decay});
  double decay = cfg.ema_decay;
  if (cfg.ema_warmup) {
    const auto k = static_cast<double>(state.model.step);
    decay = std::min(decay, (1.0 + k) / (10.0 + k));
  }
  ema_update(state.ema, state.model, decay);
  update_marginal(state.marginal, batch_mean);
  return stats;
}

namespace {

// Cycles through a fresh seeded permutation each epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, RngStream rng) : rng_(rng), perm_(n) {
    std::iota(perm_.begin(), perm_.end(), 0);
    reshuffle();
  }
  std::size_t next() {
    if (pos_ == perm_.size()) reshuffle();
    return perm_[pos_++];
  }

 private:
  void reshuffle() {
    for (std::size_t i = perm_.size(); i > 1; --i) {
      std::swap(perm_[i - 1], perm_[static_cast<std::size_t>(rng_.below(i))]);
    }
    pos_ = 0;
  }
  RngStream rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

// With-replacement draws proportional to fixed weights.
class WeightedSampler {
 public:
  WeightedSampler(std::span<const double> weights, RngStream rng) : rng_(rng) {
    cumulative_.resize(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative_.begin());
  }
  std::size_t next() {
    const double u = rng_.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  RngStream rng_;
  std::vector<double> cumulative_;
};

}  // namespace

GenerationResult train_generation(const LabeledPool& labeled, const Dataset& unlabeled,
                                  const SslConfig& cfg, std::span<const double> base_distribution,
                                  double temperature, std::uint64_t seed) {
  cfg.validate();
  if (labeled.size() == 0 || unlabeled.size() == 0) {
    throw InvalidArgument("training needs nonempty labeled and unlabeled sets");
  }
  if (labeled.dim != unlabeled.dim() || labeled.num_classes != unlabeled.num_classes()) {
    throw InvalidArgument("labeled and unlabeled sets disagree on dim or class count");
  }
  const auto counts = labeled.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw InvalidArgument("class " + std::to_string(c) + " is absent from the labeled set");
    }
  }

  const ModelDims dims{labeled.dim, cfg.hidden, labeled.num_classes};
  const RngStream root(seed);
  TrainerState state = TrainerState::fresh(dims, cfg, root.derive("model").key());

  std::optional<TargetDistribution> target;
  if (cfg.alignment != AlignmentMode::off) {
    target.emplace(std::vector<double>(base_distribution.begin(), base_distribution.end()),
                   temperature);
  }

  EpochSampler unlabeled_sampler(unlabeled.size(), root.derive("unlabeled-order"));
  std::optional<EpochSampler> labeled_epochs;
  std::optional<WeightedSampler> labeled_weighted;
  if (cfg.resample_labeled) {
    std::vector<double> w(labeled.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(labeled.labels[i])]);
    }
    labeled_weighted.emplace(w, root.derive("labeled-order"));
  } else {
    labeled_epochs.emplace(labeled.size(), root.derive("labeled-order"));
  }

  const std::size_t d = labeled.dim;
  const std::size_t n_l = cfg.batch_labeled;
  const std::size_t n_u = cfg.batch_unlabeled();
  std::vector<double> l_rows(n_l * d), u_rows(n_u * d);
  std::vector<std::size_t> l_ids(n_l), u_ids(n_u);
  std::vector<int> l_labels(n_l);

  GenerationResult out;
  out.log.reserve(static_cast<std::size_t>(cfg.steps));
  const RngStream step_root = root.derive("steps");
  for (long k = 0; k < cfg.steps; ++k) {
    for (std::size_t i = 0; i < n_l; ++i) {
      const std::size_t j = labeled_weighted ? labeled_weighted->next() : labeled_epochs->next();
      const auto r = labeled.row(j);
      std::copy(r.begin(), r.end(), l_rows.begin() + static_cast<std::ptrdiff_t>(i * d));
      l_ids[i] = j;
      l_labels[i] = labeled.labels[j];
    }
    for (std::size_t i = 0; i < n_u; ++i) {
      const std::size_t j = unlabeled_sampler.next();
      const auto r = unlabeled.row(j);
      std::copy(r.begin(), r.end(), u_rows.begin() + static_cast<std::ptrdiff_t>(i * d));
      u_ids[i] = j;
    }
    const double lr = cosine_lr(cfg.sgd.lr, k, cfg.steps);
    StepStats s = ssl_step(state, Batch{l_rows, l_ids}, l_labels, Batch{u_rows, u_ids}, cfg,
                           target ? &*target : nullptr, lr, step_root.derive(static_cast<std::uint64_t>(k)));
    s.t = temperature;
    out.log.push_back(s);
  }
  out.model = std::move(state.model);
  out.ema = std::move(state.ema);
  out.marginal = std::move(state.marginal);
  return out;
}

std::string format_training_log(std::span<const StepStats> log) {
  std::string out = "step,loss_s,loss_u,accept_rate,t,lr\n";
  char buf[64];
  auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
  };
  for (const auto& s : log) {
    out += std::to_string(s.step);
    out += ',';
    num(s.loss_s);
    out += ',';
    num(s.loss_u);
    out += ',';
    num(s.accept_rate);
    out += ',';
    num(s.t);
    out += ',';
    num(s.lr);
    out += '\n';
  }
  return out;
}

}  // namespace crest
