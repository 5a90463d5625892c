// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "crest/crest_loop.hpp"
#include "crest/data.hpp"
#include "crest/harness.hpp"
#include "crest/metrics.hpp"
#include "crest/model.hpp"
#include "crest/rebalance.hpp"
#include "crest/rng.hpp"

using namespace crest;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_seconds) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s (%s; %.2fs of %.0fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs,
              budget_seconds);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Synthetic long-tailed setting shared by the bias and trend criteria.
constexpr std::size_t kClasses = 10;
const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

RunConfig trend_config(std::uint64_t seed, CrestMode mode) {
  RunConfig cfg;
  SyntheticSource s;
  s.num_classes = kClasses;
  s.gamma = 100.0;
  s.n1 = 500;
  s.params = SynthParams{16, 5.0, 1.0};
  s.test_per_class = 100;
  s.seed = seed;
  cfg.synthetic = s;
  cfg.beta = 0.1;
  cfg.split_seed = seed;
  cfg.seed = seed;
  cfg.crest.mode = mode;
  cfg.crest.final_generation = 2;  // generations 0, 1, 2
  cfg.crest.seed = seed;
  cfg.crest.ssl.augment = AugmentPolicy::weak_for(s.params.noise_sigma);
  return cfg;
}

std::vector<double> class_sizes(const SplitPair& split) {
  std::vector<double> out;
  const auto a = split.labeled.class_counts();
  const auto b = split.unlabeled.class_counts();
  for (std::size_t c = 0; c < a.size(); ++c) out.push_back(static_cast<double>(a[c] + b[c]));
  return out;
}

struct BaselineRun {
  std::vector<double> sizes;
  PerClassStats test;
  double mean_recall = 0.0;
};

std::vector<BaselineRun> baselines;

double minority_recall(const PerClassStats& s) {
  return mean(std::vector<double>(s.recall.begin() + kClasses / 2, s.recall.end()));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  criterion("sampling-rate formula", 1.0, [] {
    const auto profile = build_longtail_profile(10, 100.0, 5000);
    bool ok = true;
    for (double alpha : {0.0, 0.25, 1.0 / 3.0, 0.5, 1.0, 2.0}) {
      const auto mu = sampling_rates(profile, alpha);
      ok &= std::abs(mu.back() - 1.0) <= 1e-12;
      if (alpha == 0.0) {
        for (double v : mu) ok &= std::abs(v - 1.0) <= 1e-12;
      }
    }
    const double mu1 = sampling_rates(profile, 1.0 / 3.0).front();
    const double want = std::cbrt(0.01);
    ok &= std::abs(mu1 - want) <= 1e-12 * want && std::abs(mu1 - 0.2154) < 1e-4;
    return Outcome{ok, "mu_1=" + fmt("%.10f", mu1)};
  });

  criterion("temperature schedule", 1.0, [] {
    bool ok = true;
    double worst = 0.0;
    for (int G = 1; G <= 20; ++G) {
      for (double t_min : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
        ok &= temperature_schedule(0, G, t_min) == 1.0;
        ok &= temperature_schedule(G, G, t_min) == t_min;
        for (int g = 1; g <= G; ++g) {
          const double inc = temperature_schedule(g, G, t_min) - temperature_schedule(g - 1, G, t_min);
          worst = std::max(worst, std::abs(inc + (1.0 - t_min) / G));
        }
      }
    }
    ok &= worst <= 1e-15;
    return Outcome{ok, "max increment error " + fmt("%.2e", worst)};
  });

  criterion("distribution alignment", 5.0, [] {
    bool ok = true;
    RngStream rng(11);
    auto simplex = [&](std::size_t n, double floor) {
      std::vector<double> v(n);
      for (double& x : v) x = floor + rng.uniform();
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (double& x : v) x /= s;
      return v;
    };
    double cancel = 0.0, simplex_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const std::size_t n = 2 + rng.below(9);
      const auto p = simplex(n, 0.01);
      const auto q = simplex(n, 0.0);
      const auto same = align(q, TargetDistribution(p, 1.0), MarginalState{p, 0.99, 0});
      for (std::size_t k = 0; k < n; ++k) cancel = std::max(cancel, std::abs(same[k] - q[k]));
      const auto out = align(q, TargetDistribution(simplex(n, 0.0), rng.uniform()),
                             MarginalState{simplex(n, 0.0), 0.99, 0});
      double s = 0.0;
      for (double v : out) {
        ok &= v >= 0.0 && std::isfinite(v);
        s += v;
      }
      simplex_err = std::max(simplex_err, std::abs(s - 1.0));
    }
    ok &= cancel <= 1e-12 && simplex_err <= 1e-12;
    const TargetDistribution flat({0.9, 0.09, 0.01}, 0.0);
    for (double v : flat.target()) ok &= std::abs(v - 1.0 / 3.0) <= 1e-15;
    const auto hand = align(std::vector<double>{0.8, 0.2}, TargetDistribution({0.5, 0.5}, 1.0),
                            MarginalState{{0.6, 0.4}, 0.99, 0});
    ok &= std::abs(hand[0] - 0.7273) <= 1e-4 && std::abs(hand[1] - 0.2727) <= 1e-4;
    return Outcome{ok, "cancel err " + fmt("%.1e", cancel) + ", simplex err " + fmt("%.1e", simplex_err) +
                           ", example (" + fmt("%.4f", hand[0]) + ", " + fmt("%.4f", hand[1]) + ")"};
  });

  criterion("long-tail construction", 1.0, [] {
    const auto p = build_longtail_profile(10, 100.0, 5000);
    bool ok = p.count(0) == 5000 && p.count(9) == 50;
    for (std::size_t l = 1; l < 10; ++l) ok &= p.count(l) <= p.count(l - 1);
    const auto balanced = build_longtail_profile(10, 1.0, 500);
    for (long c : balanced.counts()) ok &= c == 500;
    return Outcome{ok, "N_1=" + std::to_string(p.count(0)) + " N_10=" + std::to_string(p.count(9))};
  });

  criterion("gradient check", 30.0, [] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream rng(seed + 500);
      const ModelDims dims{3 + rng.below(4), 4 + rng.below(8), 2 + rng.below(4)};
      const auto model = init_model(dims, seed);
      const std::size_t n = 1 + rng.below(4);
      std::vector<double> rows(n * dims.input), w(n);
      std::vector<int> y(n);
      for (double& v : rows) v = rng.normal();
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(rng.below(dims.classes));
        w[i] = 0.5 + rng.uniform();
      }
      worst = std::max(worst, grad_check(model.params, rows, y, w));
    }
    return Outcome{worst < 1e-4, "worst relative error " + fmt("%.2e", worst) + " over 100 models"};
  });

  criterion("selection oracle", 10.0, [] {
    RngStream rng(77);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t classes = 2 + rng.below(6);
      const std::size_t n = 1 + rng.below(100);
      std::vector<PseudoLabel> pls;
      for (std::size_t i = 0; i < n; ++i) {
        pls.push_back({i, static_cast<int>(rng.below(classes)), static_cast<double>(rng.below(8)) / 8.0, {}});
      }
      std::vector<double> rates(classes);
      for (double& r : rates) r = rng.uniform();
      std::vector<std::size_t> expected;
      for (std::size_t l = 0; l < classes; ++l) {
        std::vector<PseudoLabel> m;
        for (const auto& p : pls) {
          if (static_cast<std::size_t>(p.label) == l) m.push_back(p);
        }
        std::sort(m.begin(), m.end(), [](const PseudoLabel& a, const PseudoLabel& b) {
          return a.confidence != b.confidence ? a.confidence > b.confidence : a.index < b.index;
        });
        std::size_t keep = 0;
        while (static_cast<double>(keep) < rates[l] * static_cast<double>(m.size()) - 1e-9) ++keep;
        for (std::size_t i = 0; i < keep; ++i) expected.push_back(m[i].index);
      }
      std::vector<std::size_t> got;
      for (const auto& p : select_pseudo_labeled(pls, rates).chosen) got.push_back(p.index);
      mismatches += got != expected;
    }
    return Outcome{mismatches == 0, std::to_string(mismatches) + " mismatches in 200 sets"};
  });

  criterion("alpha=0 falls back to self-training on all of U", 60.0, [] {
    const auto profile = build_longtail_profile(4, 10.0, 120);
    const auto d = synth_gaussian_dataset(profile, SynthParams{4, 5.0, 1.0}, 3);
    const auto split = split_labeled_unlabeled(d, 0.2, 3);
    const auto test = synth_gaussian_dataset(ClassProfile(std::vector<long>(4, 30)), SynthParams{4, 5.0, 1.0}, 3, 1);
    CrestConfig cfg;
    cfg.mode = CrestMode::crest;
    cfg.alpha = 0.0;
    cfg.final_generation = 3;
    cfg.ssl.steps = 100;
    cfg.ssl.batch_labeled = 16;
    cfg.ssl.unlabeled_ratio = 2;
    cfg.ssl.hidden = 16;
    cfg.ssl.augment = AugmentPolicy::weak_for(1.0);
    const auto run = run_crest(split, test, cfg);
    bool ok = !run.error && run.reports.size() == 4;
    for (const auto& r : run.reports) {
      ok &= r.selected_per_class == r.predicted_per_class;
      ok &= std::accumulate(r.selected_per_class.begin(), r.selected_per_class.end(), 0L) ==
            static_cast<long>(split.unlabeled.size());
      if (r.generation > 0) ok &= r.train_size == split.labeled.size() + split.unlabeled.size();
    }
    return Outcome{ok, "|U|=" + std::to_string(split.unlabeled.size()) + " selected in each of " +
                           std::to_string(run.reports.size()) + " generations"};
  });

  criterion("bias reproduction at generation 0", 600.0, [] {
    std::vector<double> rho_r, rho_p;
    for (auto seed : kSeeds) {
      const auto cfg = trend_config(seed, CrestMode::baseline);
      const auto data = prepare_data(cfg);
      const auto run = run_crest(data.split, data.test, cfg.crest);
      if (run.error) return Outcome{false, *run.error};
      const auto& r = run.reports.front();
      baselines.push_back({class_sizes(data.split), r.test, r.test_mean_recall});
      rho_r.push_back(spearman(baselines.back().sizes, r.test.recall));
      rho_p.push_back(spearman(baselines.back().sizes, r.test.precision));
    }
    const double mr = mean(rho_r), mp = mean(rho_p);
    return Outcome{mr > 0.0 && mp < 0.0, "mean spearman(size, recall)=" + fmt("%.3f", mr) +
                                             ", (size, precision)=" + fmt("%.3f", mp) + " over " +
                                             std::to_string(kSeeds.size()) + " seeds"};
  });

  criterion("improvement over generations", 1800.0, [] {
    if (baselines.size() != kSeeds.size()) return Outcome{false, "baseline runs unavailable"};
    std::vector<double> gain, base_minor, final_minor;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      const auto cfg = trend_config(kSeeds[i], CrestMode::crest_plus);
      const auto data = prepare_data(cfg);
      const auto run = run_crest(data.split, data.test, cfg.crest);
      if (run.error || run.reports.size() != 3) return Outcome{false, run.error.value_or("missing generations")};
      const auto& last = run.reports.back();
      gain.push_back(last.test_mean_recall - baselines[i].mean_recall);
      base_minor.push_back(minority_recall(baselines[i].test));
      final_minor.push_back(minority_recall(last.test));
    }
    const double g = mean(gain);
    const double b = mean(base_minor), f = mean(final_minor);
    return Outcome{g >= 0.02 && f > b, "mean recall gain " + fmt("%+.2f", 100.0 * g) + " points; minority half " +
                                           fmt("%.3f", b) + " -> " + fmt("%.3f", f)};
  });

  criterion("byte-identical metrics.csv", 300.0, [] {
    const auto root = std::filesystem::temp_directory_path() / "crest_acceptance_determinism";
    std::filesystem::remove_all(root);
    auto cfg = trend_config(9, CrestMode::crest_plus);
    cfg.crest.final_generation = 1;
    cfg.crest.ssl.steps = 300;
    cfg.output_dir = root / "a";
    execute_run(cfg);
    cfg.output_dir = root / "b";
    execute_run(cfg);
    const auto a = slurp(root / "a" / "metrics.csv");
    const auto b = slurp(root / "b" / "metrics.csv");
    std::filesystem::remove_all(root);
    return Outcome{!a.empty() && a == b, std::to_string(a.size()) + " bytes compared"};
  });

  criterion("metrics oracle", 5.0, [] {
    RngStream rng(5);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t L = 2 + rng.below(6);
      const std::size_t n = rng.below(50);
      std::vector<int> p(n), t(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<int>(rng.below(L));
        t[i] = static_cast<int>(rng.below(L));
      }
      const auto cm = confusion(p, t, L);
      const auto s = per_class_precision_recall(cm);
      for (std::size_t a = 0; a < L; ++a) {
        for (std::size_t b = 0; b < L; ++b) {
          long c = 0;
          for (std::size_t i = 0; i < n; ++i) c += static_cast<std::size_t>(t[i]) == a && static_cast<std::size_t>(p[i]) == b;
          mismatches += cm.at(a, b) != c;
        }
        long tp = 0, tt = 0, pp = 0;
        for (std::size_t i = 0; i < n; ++i) {
          tp += static_cast<std::size_t>(t[i]) == a && static_cast<std::size_t>(p[i]) == a;
          tt += static_cast<std::size_t>(t[i]) == a;
          pp += static_cast<std::size_t>(p[i]) == a;
        }
        mismatches += s.recall[a] != (tt ? static_cast<double>(tp) / static_cast<double>(tt) : 0.0);
        mismatches += s.precision[a] != (pp ? static_cast<double>(tp) / static_cast<double>(pp) : 0.0);
      }
    }
    return Outcome{mismatches == 0, std::to_string(mismatches) + " mismatches in 100 sets"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
