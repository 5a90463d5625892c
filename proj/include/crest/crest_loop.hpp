#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crest/data.hpp"
#include "crest/metrics.hpp"
#include "crest/ssl_core.hpp"

namespace crest {

/// baseline: one generation, no alignment. crest: self-training with
/// class-rebalancing selection, no alignment. crest_plus: adds alignment with the
/// linear temperature schedule. da_constant: alignment at a fixed temperature.
enum class CrestMode { baseline, crest, crest_plus, da_constant };

enum class ConfidenceSource { refined, raw };
enum class TargetSource { original, expanded };

struct CrestConfig {
  double alpha = 1.0 / 3.0;
  int final_generation = 5;  // G; generations 0..G are trained
  double t_min = 0.5;
  double t_constant = 0.5;
  CrestMode mode = CrestMode::crest_plus;
  ConfidenceSource selection_confidence = ConfidenceSource::refined;
  TargetSource target_source = TargetSource::original;
  std::size_t sweep_views = 4;
  SslConfig ssl;
  std::uint64_t seed = 0;

  void validate() const;
  /// Number of generations actually trained (baseline trains exactly one).
  [[nodiscard]] int generations() const;
  [[nodiscard]] AlignmentMode alignment() const;
  /// Temperature of generation g under the configured mode.
  [[nodiscard]] double temperature(int generation) const;
};

/// mu_l = (N_{L-1-l} / N_0)^alpha with classes indexed by descending size.
std::vector<double> sampling_rates(const ClassProfile& profile, double alpha);

struct SelectionResult {
  std::vector<PseudoLabel> chosen;  // grouped by class, most confident first
  std::vector<long> requested;      // ceil(mu_l * n_l)
  std::vector<long> available;      // n_l
};

/// Keeps the ceil(mu_l * n_l) most confident predictions of each class; equal
/// confidences go to the lower example index.
SelectionResult select_pseudo_labeled(std::span<const PseudoLabel> pseudo_labels,
                                      std::span<const double> rates);

/// X' = X plus every chosen unlabeled row under its pseudo label.
LabeledPool expand_labeled_set(const Dataset& labeled, const SelectionResult& selection,
                               const Dataset& unlabeled);

/// Pseudo-labels for every unlabeled row: the (optionally aligned) prediction
/// averaged over `views` weak views. The hard label and confidence come from
/// the refined average, or from the raw average when `source` is raw.
std::vector<PseudoLabel> sweep_pseudo_labels(const Parameters& params, const Dataset& unlabeled,
                                             const SslConfig& cfg,
                                             const TargetDistribution* target,
                                             const MarginalState& marginal, std::size_t views,
                                             ConfidenceSource source, std::uint64_t seed);

/// Argmax predictions without augmentation.
std::vector<int> predict_labels(const Parameters& params, const Dataset& data);

struct GenerationReport {
  int generation = 0;
  double temperature = 1.0;
  std::size_t train_size = 0;          // |X'_g| used for this generation
  std::size_t train_pseudo = 0;        // pseudo-labeled rows within it
  std::vector<double> rates;
  std::vector<long> selected_per_class;
  std::vector<long> predicted_per_class;
  PerClassStats test;
  double test_mean_recall = 0.0;
  PerClassStats unlabeled;             // full pseudo-label sweep vs hidden truth
  double unlabeled_mean_recall = 0.0;
  PerClassStats selected;              // chosen subset vs hidden truth
  std::vector<StepStats> log;
};

struct CrestRun {
  std::vector<GenerationReport> reports;
  std::optional<std::string> error;  // set when a generation failed; reports are partial
};

using GenerationCallback = std::function<void(const GenerationReport&)>;

/// Trains generations 0..G. Each generation trains on X'_g = X plus the previous
/// generation's selection (rebuilt from X, never cumulative) and the full U.
CrestRun run_crest(const SplitPair& data, const Dataset& test, const CrestConfig& cfg,
                   const GenerationCallback& on_generation = {});

/// Mean of the defined per-class recalls.
double defined_mean_recall(const PerClassStats& stats);

}  // namespace crest
