#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crest/crest_loop.hpp"
#include "crest/data.hpp"

namespace crest {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";
/// When set, relative output directories resolve under this root.
inline constexpr const char* kOutputRootEnv = "CREST_OUTPUT_ROOT";

struct SyntheticSource {
  std::size_t num_classes = 10;
  double gamma = 100.0;
  long n1 = 500;
  SynthParams params;
  long test_per_class = 100;
  std::uint64_t seed = 0;
};

struct CsvSource {
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
};

struct RunConfig {
  std::optional<SyntheticSource> synthetic;
  std::optional<CsvSource> csv;
  double beta = 0.1;
  std::uint64_t split_seed = 0;
  CrestConfig crest;
  std::filesystem::path output_dir = "crest_run";
  std::uint64_t seed = 0;
};

/// Parses a config document. Unknown keys, wrong types and out-of-domain values
/// throw InvalidArgument naming the offending field. Unset seeds default to the
/// master seed; augmentation defaults scale with the synthetic noise level.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved config; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

std::string mode_name(CrestMode mode);
CrestMode parse_mode(const std::string& name);

struct ExperimentData {
  SplitPair split;
  Dataset test;
  std::vector<int> original_label;  // canonical class -> 1-based source label
};

ExperimentData prepare_data(const RunConfig& config);

/// Applies the output-root environment override to a relative directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

nlohmann::json to_json(const GenerationReport& report);

/// Columns generation,split,class,n_true,n_pred,precision,recall,precision_defined;
/// classes are 1-based ranks, and each (generation, split) ends with a `mean`
/// summary row.
std::string format_metrics_csv(std::span<const GenerationReport> reports);

struct RunOutput {
  CrestRun run;
  std::filesystem::path directory;
};

/// Prepares data, executes run_crest and writes manifest.json, reports.json,
/// metrics.csv and train_log_gen<g>.csv into the resolved output directory.
/// Throws IoError on write failures.
RunOutput execute_run(const RunConfig& config, bool quiet = true);

enum class SweepAxis { alpha, t_min, t_constant };
SweepAxis parse_sweep_axis(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

/// Training seed of a sweep sub-run, derived from the master seed and value.
std::uint64_t sweep_seed(std::uint64_t master, SweepAxis axis, double value);

struct SweepResult {
  std::string summary_csv;
  int failures = 0;
};

/// One run per value (plus a scheduled crest_plus reference for t_constant),
/// each in its own sub-directory; writes sweep_summary.csv.
SweepResult execute_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                          bool parallel = false, bool quiet = true);

enum class PlotKind { per_class_bars, recall_over_generations };
PlotKind parse_plot_kind(const std::string& name);

/// Renders an SVG chart from metrics.csv text. Throws InvalidArgument naming a
/// missing column.
std::string render_plot_svg(const std::string& metrics_csv, PlotKind kind);

}  // namespace crest
