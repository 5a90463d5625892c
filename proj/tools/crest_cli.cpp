// crest: command-line harness for class-rebalancing self-training runs.
//
//   crest synth --out data/          emit train/test CSV + dataset manifest
//   crest run config.json            one end-to-end run
//   crest sweep config.json --axis alpha --values 0,0.333,0.5,1
//   crest plot runs/x/metrics.csv --kind per_class_bars
//
// Exit codes: 0 ok, 1 configuration error, 2 training failure, 3 I/O failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crest/errors.hpp"
#include "crest/harness.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kTrainingError = 2;
constexpr int kIoError = 3;

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::logic_error&) {
      throw crest::InvalidArgument("--values: '" + cell + "' is not a number");
    }
    if (used != cell.size()) throw crest::InvalidArgument("--values: '" + cell + "' is not a number");
    out.push_back(v);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw crest::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw crest::IoError("write failed: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-rebalancing self-training for imbalanced semi-supervised learning"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a long-tailed synthetic dataset as CSV");
  crest::SyntheticSource src;
  std::string synth_out = "synth";
  synth->add_option("--classes", src.num_classes, "Number of classes")->capture_default_str();
  synth->add_option("--gamma", src.gamma, "Imbalance ratio N_1/N_L")->capture_default_str();
  synth->add_option("--n1", src.n1, "Size of the largest class")->capture_default_str();
  synth->add_option("--dim", src.params.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--separation", src.params.separation, "Distance between class means")->capture_default_str();
  synth->add_option("--noise-sigma", src.params.noise_sigma, "Per-coordinate noise scale")->capture_default_str();
  synth->add_option("--test-per-class", src.test_per_class, "Balanced test set size per class")->capture_default_str();
  synth->add_option("--seed", src.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  auto* run = app.add_subcommand("run", "Execute one configured run");
  std::string run_config;
  bool verbose = false;
  run->add_option("config", run_config, "Run config (JSON)")->required();
  run->add_flag("-v,--verbose", verbose, "Print per-generation progress");

  auto* sweep = app.add_subcommand("sweep", "Run one configuration per value of an axis");
  std::string sweep_config, axis_name, values_text;
  bool parallel = false;
  sweep->add_option("config", sweep_config, "Base run config (JSON)")->required();
  sweep->add_option("--axis", axis_name, "alpha | t_min | t_constant")->required();
  sweep->add_option("--values", values_text, "Comma-separated values")->required();
  sweep->add_flag("--parallel", parallel, "Run sub-runs concurrently");
  sweep->add_flag("-v,--verbose", verbose, "Print per-generation progress");

  auto* plot = app.add_subcommand("plot", "Render SVG charts from metrics.csv");
  std::string plot_csv, plot_out;
  std::vector<std::string> kinds;
  plot->add_option("metrics_csv", plot_csv, "metrics.csv from a run")->required();
  plot->add_option("--kind", kinds, "per_class_bars | recall_over_generations")->required();
  plot->add_option("--out", plot_out, "Output directory (default: next to the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*synth) {
      const auto profile = crest::build_longtail_profile(src.num_classes, src.gamma, src.n1);
      const auto train = crest::synth_gaussian_dataset(profile, src.params, src.seed, 0);
      const crest::ClassProfile balanced(std::vector<long>(src.num_classes, src.test_per_class));
      const auto test = crest::synth_gaussian_dataset(balanced, src.params, src.seed, 1);
      const auto dir = crest::resolve_output_dir(synth_out);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw crest::IoError("cannot create " + dir.string());
      crest::write_csv_dataset(train, dir / "train.csv");
      crest::write_csv_dataset(test, dir / "test.csv");
      nlohmann::json manifest{{"generator", "gaussian_simplex"},
                              {"num_classes", src.num_classes},
                              {"dim", src.params.dim},
                              {"counts", profile.counts()},
                              {"test_counts", balanced.counts()},
                              {"gamma", src.gamma},
                              {"n1", src.n1},
                              {"separation", src.params.separation},
                              {"noise_sigma", src.params.noise_sigma},
                              {"seed", src.seed},
                              {"train_sample_stream", 0},
                              {"test_sample_stream", 1}};
      write_file(dir / "manifest.json", manifest.dump(2) + "\n");
      std::cout << "wrote " << train.size() << " train and " << test.size() << " test rows to "
                << dir.string() << "\n";
      return 0;
    }
    if (*run) {
      const auto cfg = crest::load_run_config(run_config);
      const auto out = crest::execute_run(cfg, !verbose);
      if (out.run.error) {
        std::cerr << "training failed: " << *out.run.error << "\n";
        return kTrainingError;
      }
      std::cout << "wrote " << out.run.reports.size() << " generation(s) to "
                << out.directory.string() << "\n";
      return 0;
    }
    if (*sweep) {
      const auto cfg = crest::load_run_config(sweep_config);
      const auto axis = crest::parse_sweep_axis(axis_name);
      const auto values = parse_values(values_text);
      if (values.empty()) throw crest::InvalidArgument("--values is empty");
      const auto result = crest::execute_sweep(cfg, axis, values, parallel, !verbose);
      std::cout << result.summary_csv;
      if (result.failures > 0) {
        std::cerr << result.failures << " sub-run(s) failed\n";
        return kTrainingError;
      }
      return 0;
    }
    if (*plot) {
      std::ifstream in(plot_csv);
      if (!in) throw crest::IoError("cannot open " + plot_csv);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::filesystem::path dir =
          plot_out.empty() ? std::filesystem::path(plot_csv).parent_path() : std::filesystem::path(plot_out);
      std::vector<std::pair<std::string, std::string>> charts;
      for (const auto& kind : kinds) {
        charts.emplace_back(kind + ".svg", crest::render_plot_svg(buf.str(), crest::parse_plot_kind(kind)));
      }
      if (!dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw crest::IoError("cannot create " + dir.string());
      }
      for (const auto& [name, svg] : charts) {
        write_file(dir / name, svg);
        std::cout << (dir / name).string() << "\n";
      }
      return 0;
    }
  } catch (const crest::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const crest::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const crest::TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTrainingError;
  } catch (const crest::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrainingError;
  }
  return 0;
}
