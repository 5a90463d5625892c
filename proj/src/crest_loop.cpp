#include "crest/crest_loop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crest/errors.hpp"
#include "crest/rng.hpp"

namespace crest {

void CrestConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("crest.alpha must be >= 0");
  if (final_generation < 0) throw InvalidArgument("crest.final_generation must be >= 0");
  if (!(t_min >= 0.0 && t_min <= 1.0)) throw InvalidArgument("crest.t_min must lie in [0, 1]");
  if (!(t_constant >= 0.0 && t_constant <= 1.0)) {
    throw InvalidArgument("crest.t_constant must lie in [0, 1]");
  }
  if (sweep_views < 1) throw InvalidArgument("crest.sweep_views must be >= 1");
  ssl.validate();
}

int CrestConfig::generations() const {
  return mode == CrestMode::baseline ? 1 : final_generation + 1;
}

AlignmentMode CrestConfig::alignment() const {
  switch (mode) {
    case CrestMode::crest_plus: return AlignmentMode::scheduled;
    case CrestMode::da_constant: return AlignmentMode::constant;
    default: return AlignmentMode::off;
  }
}

double CrestConfig::temperature(int generation) const {
  switch (mode) {
    case CrestMode::crest_plus:
      return final_generation == 0 ? 1.0
                                   : temperature_schedule(generation, final_generation, t_min);
    case CrestMode::da_constant: return t_constant;
    default: return 1.0;
  }
}

std::vector<double> sampling_rates(const ClassProfile& profile, double alpha) {
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
  const auto& n = profile.counts();
  const std::size_t num_classes = n.size();
  std::vector<double> mu(num_classes);
  for (std::size_t l = 0; l < num_classes; ++l) {
    const double ratio =
        static_cast<double>(n[num_classes - 1 - l]) / static_cast<double>(n.front());
    mu[l] = std::pow(ratio, alpha);
  }
  return mu;
}

SelectionResult select_pseudo_labeled(std::span<const PseudoLabel> pseudo_labels,
                                      std::span<const double> rates) {
  const std::size_t num_classes = rates.size();
  std::vector<std::vector<const PseudoLabel*>> by_class(num_classes);
  for (const auto& pl : pseudo_labels) {
    if (pl.label < 0 || static_cast<std::size_t>(pl.label) >= num_classes) {
      throw InvalidArgument("pseudo-label class out of range");
    }
    by_class[static_cast<std::size_t>(pl.label)].push_back(&pl);
  }

  SelectionResult out;
  out.requested.assign(num_classes, 0);
  out.available.assign(num_classes, 0);
  for (std::size_t l = 0; l < num_classes; ++l) {
    auto& members = by_class[l];
    const auto n = static_cast<long>(members.size());
    out.available[l] = n;
    if (n == 0) continue;
    // Slack keeps products like 0.1 * 20 from rounding up past an exact integer.
    const double want = std::ceil(rates[l] * static_cast<double>(n) - 1e-9);
    const long keep = std::clamp(static_cast<long>(want), 0L, n);
    out.requested[l] = keep;
    std::stable_sort(members.begin(), members.end(), [](const PseudoLabel* a, const PseudoLabel* b) {
      if (a->confidence != b->confidence) return a->confidence > b->confidence;
      return a->index < b->index;
    });
    for (long i = 0; i < keep; ++i) out.chosen.push_back(*members[static_cast<std::size_t>(i)]);
  }
  return out;
}

LabeledPool expand_labeled_set(const Dataset& labeled, const SelectionResult& selection,
                               const Dataset& unlabeled) {
  if (labeled.dim() != unlabeled.dim()) throw InvalidArgument("labeled/unlabeled dim mismatch");
  LabeledPool pool = LabeledPool::from_dataset(labeled);
  for (const auto& pl : selection.chosen) {
    if (pl.index >= unlabeled.size()) throw InvalidArgument("selection index out of range");
    const auto r = unlabeled.row(pl.index);
    pool.features.insert(pool.features.end(), r.begin(), r.end());
    pool.labels.push_back(pl.label);
    pool.pseudo.push_back(true);
    pool.source_index.push_back(pl.index);
  }
  return pool;
}

std::vector<PseudoLabel> sweep_pseudo_labels(const Parameters& params, const Dataset& unlabeled,
                                             const SslConfig& cfg,
                                             const TargetDistribution* target,
                                             const MarginalState& marginal, std::size_t views,
                                             ConfidenceSource source, std::uint64_t seed) {
  const std::size_t d = unlabeled.dim();
  const std::size_t classes = params.dims().classes;
  const RngStream root = RngStream(seed).derive("pseudo-label-sweep");
  std::vector<PseudoLabel> out(unlabeled.size());
  std::vector<double> view(d), raw(classes), refined(classes), q(classes);
  for (std::size_t m = 0; m < unlabeled.size(); ++m) {
    std::fill(raw.begin(), raw.end(), 0.0);
    std::fill(refined.begin(), refined.end(), 0.0);
    RngStream rng = root.derive(m);
    for (std::size_t v = 0; v < views; ++v) {
      weak_augment_into(unlabeled.row(m), cfg.augment, rng, std::span<double>(view));
      q = predict_proba(params, view);
      for (std::size_t k = 0; k < classes; ++k) raw[k] += q[k];
      if (target != nullptr) align_inplace(q, target->target(), marginal.probs);
      for (std::size_t k = 0; k < classes; ++k) refined[k] += q[k];
    }
    for (std::size_t k = 0; k < classes; ++k) {
      raw[k] /= static_cast<double>(views);
      refined[k] /= static_cast<double>(views);
    }
    const auto& ranked = source == ConfidenceSource::raw ? raw : refined;
    const std::size_t top = argmax(ranked);
    out[m] = PseudoLabel{m, static_cast<int>(top), ranked[top], refined};
  }
  return out;
}

std::vector<int> predict_labels(const Parameters& params, const Dataset& data) {
  const auto probs = predict_proba_batch(params, data.features());
  const std::size_t classes = params.dims().classes;
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = static_cast<int>(
        argmax(std::span<const double>(probs).subspan(i * classes, classes)));
  }
  return out;
}

double defined_mean_recall(const PerClassStats& stats) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t l = 0; l < stats.recall.size(); ++l) {
    if (!stats.recall_defined[l]) continue;
    sum += stats.recall[l];
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

CrestRun run_crest(const SplitPair& data, const Dataset& test, const CrestConfig& base_cfg,
                   const GenerationCallback& on_generation) {
  base_cfg.validate();
  CrestConfig cfg = base_cfg;
  cfg.ssl.alignment = cfg.alignment();

  const Dataset& x = data.labeled;
  const Dataset& u = data.unlabeled;
  if (test.dim() != x.dim() || test.num_classes() != x.num_classes()) {
    throw InvalidArgument("test set disagrees with training data on dim or class count");
  }
  const ClassProfile labeled_profile = x.profile();
  const std::vector<double> rates = sampling_rates(labeled_profile, cfg.alpha);
  const std::size_t num_classes = x.num_classes();

  CrestRun run;
  const RngStream root(cfg.seed);
  LabeledPool pool = LabeledPool::from_dataset(x);
  for (int g = 0; g < cfg.generations(); ++g) {
    GenerationReport report;
    report.generation = g;
    report.temperature = cfg.temperature(g);
    report.train_size = pool.size();
    report.train_pseudo =
        static_cast<std::size_t>(std::count(pool.pseudo.begin(), pool.pseudo.end(), true));
    report.rates = rates;

    std::vector<double> base = labeled_profile.distribution();
    if (cfg.target_source == TargetSource::expanded) {
      const auto counts = pool.class_counts();
      const double total = static_cast<double>(pool.size());
      for (std::size_t c = 0; c < num_classes; ++c) base[c] = static_cast<double>(counts[c]) / total;
    }

    GenerationResult trained;
    try {
      trained = train_generation(pool, u, cfg.ssl, base, report.temperature,
                                 root.derive("generation").derive(static_cast<std::uint64_t>(g)).key());
    } catch (const TrainingError& e) {
      run.error = "generation " + std::to_string(g) + ": " + e.what();
      return run;
    }

    std::optional<TargetDistribution> target;
    if (cfg.ssl.alignment != AlignmentMode::off) target.emplace(base, report.temperature);
    const auto pseudo = sweep_pseudo_labels(
        trained.ema.shadow, u, cfg.ssl, target ? &*target : nullptr, trained.marginal,
        cfg.sweep_views, cfg.selection_confidence,
        root.derive("sweep").derive(static_cast<std::uint64_t>(g)).key());
    const SelectionResult selection = select_pseudo_labeled(pseudo, rates);

    std::vector<int> pseudo_labels(pseudo.size());
    std::transform(pseudo.begin(), pseudo.end(), pseudo_labels.begin(),
                   [](const PseudoLabel& p) { return p.label; });
    report.unlabeled = pseudo_label_quality(pseudo_labels, u.labels(), num_classes);
    report.unlabeled_mean_recall = defined_mean_recall(report.unlabeled);

    std::vector<int> chosen_pred, chosen_true;
    for (const auto& pl : selection.chosen) {
      chosen_pred.push_back(pl.label);
      chosen_true.push_back(u.label(pl.index));
    }
    report.selected = pseudo_label_quality(chosen_pred, chosen_true, num_classes);
    report.selected_per_class = selection.requested;
    report.predicted_per_class = selection.available;

    const auto test_pred = predict_labels(trained.ema.shadow, test);
    const auto cm = confusion(test_pred, test.labels(), num_classes);
    report.test = per_class_precision_recall(cm);
    report.test_mean_recall = defined_mean_recall(report.test);
    report.log = std::move(trained.log);

    pool = expand_labeled_set(x, selection, u);
    if (on_generation) on_generation(report);
    run.reports.push_back(std::move(report));
  }
  return run;
}

}  // namespace crest
