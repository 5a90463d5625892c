#include "crest/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "crest/errors.hpp"
#include "crest/rng.hpp"

namespace crest {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw InvalidArgument(where("") + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw InvalidArgument(where(key) + " must be a number");
    return v.get<double>();
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) throw InvalidArgument(where(key) + " must be an integer");
    return v.get<long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long>() >= 0) return static_cast<std::uint64_t>(v.get<long>());
    throw InvalidArgument(where(key) + " must be a non-negative integer");
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw InvalidArgument(where(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw InvalidArgument(where(key) + " must be a string");
    return v.get<std::string>();
  }

  const json* object(const std::string& key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.contains(item.key())) throw InvalidArgument("unknown key '" + where(item.key()) + "'");
    }
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

// Rethrows a component's validation error with the config section attached.
template <typename F>
void validated(const std::string& section, F&& check) {
  try {
    check();
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    throw InvalidArgument(msg.rfind(section, 0) == 0 ? msg : section + ": " + msg);
  }
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string confidence_name(ConfidenceSource s) { return s == ConfidenceSource::raw ? "raw" : "refined"; }
std::string target_name(TargetSource s) { return s == TargetSource::expanded ? "expanded" : "original"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string mode_name(CrestMode mode) {
  switch (mode) {
    case CrestMode::baseline: return "baseline";
    case CrestMode::crest: return "crest";
    case CrestMode::crest_plus: return "crest_plus";
    case CrestMode::da_constant: return "da_constant";
  }
  return "unknown";
}

CrestMode parse_mode(const std::string& name) {
  if (name == "baseline") return CrestMode::baseline;
  if (name == "crest") return CrestMode::crest;
  if (name == "crest_plus") return CrestMode::crest_plus;
  if (name == "da_constant") return CrestMode::da_constant;
  throw InvalidArgument("mode must be one of baseline, crest, crest_plus, da_constant (got '" + name + "')");
}

RunConfig parse_run_config(const json& doc) {
  Fields top(doc, "");
  if (!top.has("schema_version")) throw InvalidArgument("schema_version is required");
  if (top.integer("schema_version", 0) != kConfigSchemaVersion) {
    throw InvalidArgument("schema_version must be " + std::to_string(kConfigSchemaVersion));
  }

  RunConfig cfg;
  cfg.seed = top.seed("seed", 0);
  cfg.output_dir = top.string("output_dir", "crest_run");
  validated("mode", [&] { cfg.crest.mode = parse_mode(top.string("mode", "crest_plus")); });
  cfg.crest.seed = cfg.seed;

  double noise_sigma = 1.0;
  const json* ds = top.object("dataset");
  if (ds == nullptr) throw InvalidArgument("dataset section is required");
  {
    Fields f(*ds, "dataset");
    const std::string source = f.string("source", "synthetic");
    if (source == "synthetic") {
      SyntheticSource s;
      s.num_classes = static_cast<std::size_t>(f.integer("num_classes", 10));
      s.gamma = f.number("gamma", 100.0);
      s.n1 = f.integer("n1", 500);
      s.params.dim = static_cast<std::size_t>(f.integer("dim", 16));
      s.params.separation = f.number("separation", 4.0);
      s.params.noise_sigma = f.number("noise_sigma", 1.0);
      s.test_per_class = f.integer("test_per_class", 100);
      s.seed = f.seed("seed", cfg.seed);
      if (s.num_classes < 2) throw InvalidArgument("dataset.num_classes must be >= 2");
      if (!(s.gamma >= 1.0)) throw InvalidArgument("dataset.gamma must be >= 1");
      if (static_cast<double>(s.n1) < s.gamma) throw InvalidArgument("dataset.n1 must be >= dataset.gamma");
      if (s.params.dim < 2) throw InvalidArgument("dataset.dim must be >= 2");
      if (s.params.dim + 1 < s.num_classes) throw InvalidArgument("dataset.dim must be >= num_classes - 1");
      if (!(s.params.separation > 0.0)) throw InvalidArgument("dataset.separation must be positive");
      if (!(s.params.noise_sigma > 0.0)) throw InvalidArgument("dataset.noise_sigma must be positive");
      if (s.test_per_class < 1) throw InvalidArgument("dataset.test_per_class must be >= 1");
      noise_sigma = s.params.noise_sigma;
      cfg.synthetic = s;
    } else if (source == "csv") {
      CsvSource c;
      if (!f.has("train_csv")) throw InvalidArgument("dataset.train_csv is required for csv source");
      if (!f.has("test_csv")) throw InvalidArgument("dataset.test_csv is required for csv source");
      c.train_csv = f.string("train_csv", "");
      c.test_csv = f.string("test_csv", "");
      cfg.csv = c;
    } else {
      throw InvalidArgument("dataset.source must be 'synthetic' or 'csv'");
    }
    f.finish();
  }

  if (const json* sp = top.object("split")) {
    Fields f(*sp, "split");
    cfg.beta = f.number("beta", 0.1);
    cfg.split_seed = f.seed("seed", cfg.seed);
    f.finish();
  } else {
    cfg.split_seed = cfg.seed;
  }
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) throw InvalidArgument("split.beta must lie in (0, 1)");

  CrestConfig& cc = cfg.crest;
  if (const json* cr = top.object("crest")) {
    Fields f(*cr, "crest");
    cc.alpha = f.number("alpha", cc.alpha);
    cc.final_generation = static_cast<int>(f.integer("final_generation", cc.final_generation));
    cc.t_min = f.number("t_min", cc.t_min);
    cc.t_constant = f.number("t_constant", cc.t_constant);
    cc.sweep_views = static_cast<std::size_t>(f.integer("sweep_views", static_cast<long>(cc.sweep_views)));
    const auto conf = f.string("selection_confidence", "refined");
    if (conf != "refined" && conf != "raw") {
      throw InvalidArgument("crest.selection_confidence must be 'refined' or 'raw'");
    }
    cc.selection_confidence = conf == "raw" ? ConfidenceSource::raw : ConfidenceSource::refined;
    const auto tgt = f.string("target_source", "original");
    if (tgt != "original" && tgt != "expanded") {
      throw InvalidArgument("crest.target_source must be 'original' or 'expanded'");
    }
    cc.target_source = tgt == "expanded" ? TargetSource::expanded : TargetSource::original;
    f.finish();
  }

  SslConfig& ssl = cc.ssl;
  if (const json* s = top.object("ssl")) {
    Fields f(*s, "ssl");
    ssl.threshold = f.number("threshold", ssl.threshold);
    ssl.lambda_u = f.number("lambda_u", ssl.lambda_u);
    ssl.steps = static_cast<int>(f.integer("steps", ssl.steps));
    ssl.batch_labeled = static_cast<std::size_t>(f.integer("batch_labeled", static_cast<long>(ssl.batch_labeled)));
    ssl.unlabeled_ratio = static_cast<std::size_t>(f.integer("unlabeled_ratio", static_cast<long>(ssl.unlabeled_ratio)));
    ssl.hidden = static_cast<std::size_t>(f.integer("hidden", static_cast<long>(ssl.hidden)));
    ssl.sgd.lr = f.number("lr", ssl.sgd.lr);
    ssl.sgd.momentum = f.number("momentum", ssl.sgd.momentum);
    ssl.sgd.weight_decay = f.number("weight_decay", ssl.sgd.weight_decay);
    ssl.ema_decay = f.number("ema_decay", ssl.ema_decay);
    ssl.ema_warmup = f.boolean("ema_warmup", ssl.ema_warmup);
    ssl.marginal_decay = f.number("marginal_decay", ssl.marginal_decay);
    ssl.resample_labeled = f.boolean("resample_labeled", ssl.resample_labeled);
    for (const char* key : {"steps", "batch_labeled", "unlabeled_ratio", "hidden"}) {
      if (f.has(key) && s->at(key).get<long>() < 1) throw InvalidArgument(std::string("ssl.") + key + " must be >= 1");
    }
    f.finish();
  }

  ssl.augment = AugmentPolicy::weak_for(noise_sigma);
  if (const json* a = top.object("augment")) {
    Fields f(*a, "augment");
    ssl.augment.weak_sigma = f.number("weak_sigma", ssl.augment.weak_sigma);
    ssl.augment.strong_sigma = f.number("strong_sigma", ssl.augment.strong_sigma);
    ssl.augment.mask_rate = f.number("mask_rate", ssl.augment.mask_rate);
    f.finish();
  }
  top.finish();

  validated("augment", [&] { ssl.augment.validate(); });
  validated("ssl", [&] { ssl.validate(); });
  validated("crest", [&] { cc.validate(); });
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["mode"] = mode_name(c.crest.mode);
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["dataset"] = {{"source", "synthetic"},     {"num_classes", s.num_classes},
                    {"gamma", s.gamma},          {"n1", s.n1},
                    {"dim", s.params.dim},       {"separation", s.params.separation},
                    {"noise_sigma", s.params.noise_sigma}, {"test_per_class", s.test_per_class},
                    {"seed", s.seed}};
  } else if (c.csv) {
    j["dataset"] = {{"source", "csv"}, {"train_csv", c.csv->train_csv.string()},
                    {"test_csv", c.csv->test_csv.string()}};
  }
  j["split"] = {{"beta", c.beta}, {"seed", c.split_seed}};
  const auto& cc = c.crest;
  j["crest"] = {{"alpha", cc.alpha},
                {"final_generation", cc.final_generation},
                {"t_min", cc.t_min},
                {"t_constant", cc.t_constant},
                {"sweep_views", cc.sweep_views},
                {"selection_confidence", confidence_name(cc.selection_confidence)},
                {"target_source", target_name(cc.target_source)}};
  const auto& s = cc.ssl;
  j["ssl"] = {{"threshold", s.threshold},
              {"lambda_u", s.lambda_u},
              {"steps", s.steps},
              {"batch_labeled", s.batch_labeled},
              {"unlabeled_ratio", s.unlabeled_ratio},
              {"hidden", s.hidden},
              {"lr", s.sgd.lr},
              {"momentum", s.sgd.momentum},
              {"weight_decay", s.sgd.weight_decay},
              {"ema_decay", s.ema_decay},
              {"ema_warmup", s.ema_warmup},
              {"marginal_decay", s.marginal_decay},
              {"resample_labeled", s.resample_labeled}};
  j["augment"] = {{"weak_sigma", s.augment.weak_sigma},
                  {"strong_sigma", s.augment.strong_sigma},
                  {"mask_rate", s.augment.mask_rate}};
  return j;
}

ExperimentData prepare_data(const RunConfig& config) {
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    const ClassProfile profile = build_longtail_profile(s.num_classes, s.gamma, s.n1);
    const Dataset train = synth_gaussian_dataset(profile, s.params, s.seed, 0);
    const ClassProfile balanced(std::vector<long>(s.num_classes, s.test_per_class));
    Dataset test = synth_gaussian_dataset(balanced, s.params, s.seed, 1);
    std::vector<int> labels(s.num_classes);
    for (std::size_t c = 0; c < s.num_classes; ++c) labels[c] = static_cast<int>(c) + 1;
    return ExperimentData{split_labeled_unlabeled(train, config.beta, config.split_seed),
                          std::move(test), std::move(labels)};
  }
  if (!config.csv) throw InvalidArgument("config has no dataset source");
  const LoadedCsv train = load_csv_dataset(config.csv->train_csv);
  const LoadedCsv test_raw = load_csv_dataset(config.csv->test_csv);
  const auto& tr = train.dataset;
  const auto& te = test_raw.dataset;
  if (te.dim() != tr.dim()) throw InvalidArgument("test csv dimension differs from train csv");
  if (te.num_classes() != tr.num_classes()) throw InvalidArgument("test csv class count differs from train csv");

  // Re-express test labels in the training set's canonical order.
  std::vector<int> to_train(tr.num_classes());
  for (std::size_t c = 0; c < tr.num_classes(); ++c) {
    const int file_label = test_raw.original_label[c];
    const auto it = std::find(train.original_label.begin(), train.original_label.end(), file_label);
    to_train[c] = static_cast<int>(it - train.original_label.begin());
  }
  std::vector<int> labels(te.labels());
  for (int& y : labels) y = to_train[static_cast<std::size_t>(y)];
  Dataset test(te.dim(), te.num_classes(), te.features(), std::move(labels));
  return ExperimentData{split_labeled_unlabeled(tr, config.beta, config.split_seed), std::move(test),
                        train.original_label};
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root != nullptr && *root != '\0' && dir.is_relative()) return std::filesystem::path(root) / dir;
  return dir;
}

namespace {

json stats_json(const PerClassStats& s) {
  std::vector<int> pd(s.precision_defined.begin(), s.precision_defined.end());
  return {{"precision", s.precision}, {"recall", s.recall}, {"precision_defined", pd},
          {"n_true", s.n_true},       {"n_pred", s.n_pred}};
}

}  // namespace

json to_json(const GenerationReport& r) {
  return {{"generation", r.generation},
          {"temperature", r.temperature},
          {"train_size", r.train_size},
          {"train_pseudo", r.train_pseudo},
          {"sampling_rates", r.rates},
          {"selected_per_class", r.selected_per_class},
          {"predicted_per_class", r.predicted_per_class},
          {"test", stats_json(r.test)},
          {"test_mean_recall", r.test_mean_recall},
          {"unlabeled", stats_json(r.unlabeled)},
          {"unlabeled_mean_recall", r.unlabeled_mean_recall},
          {"selected", stats_json(r.selected)}};
}

std::string format_metrics_csv(std::span<const GenerationReport> reports) {
  std::string out = "generation,split,class,n_true,n_pred,precision,recall,precision_defined\n";
  auto emit = [&](int g, const char* split, const PerClassStats& s, double mean_recall) {
    double precision_sum = 0.0;
    int precision_n = 0;
    long n_true = 0, n_pred = 0;
    for (std::size_t l = 0; l < s.recall.size(); ++l) {
      out += std::to_string(g) + ',' + split + ',' + std::to_string(l + 1) + ',' +
             std::to_string(s.n_true[l]) + ',' + std::to_string(s.n_pred[l]) + ',' +
             fixed6(s.precision[l]) + ',' + fixed6(s.recall[l]) + ',' +
             (s.precision_defined[l] ? "1" : "0") + '\n';
      if (s.precision_defined[l]) {
        precision_sum += s.precision[l];
        ++precision_n;
      }
      n_true += s.n_true[l];
      n_pred += s.n_pred[l];
    }
    out += std::to_string(g) + ',' + split + ",mean," + std::to_string(n_true) + ',' +
           std::to_string(n_pred) + ',' + fixed6(precision_n ? precision_sum / precision_n : 0.0) +
           ',' + fixed6(mean_recall) + ',' + (precision_n ? "1" : "0") + '\n';
  };
  for (const auto& r : reports) {
    emit(r.generation, "test", r.test, r.test_mean_recall);
    emit(r.generation, "unlabeled", r.unlabeled, r.unlabeled_mean_recall);
  }
  return out;
}

RunOutput execute_run(const RunConfig& config, bool quiet) {
  const ExperimentData data = prepare_data(config);
  const auto dir = resolve_output_dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["tool"] = "crest";
  manifest["version"] = kVersion;
  manifest["config"] = to_json(config);
  manifest["data"] = {{"labeled_counts", data.split.labeled.class_counts()},
                      {"unlabeled_counts", data.split.unlabeled.class_counts()},
                      {"test_counts", data.test.class_counts()},
                      {"dim", data.split.labeled.dim()},
                      {"class_labels", data.original_label}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  RunOutput out{run_crest(data.split, data.test, config.crest,
                          [&](const GenerationReport& r) {
                            if (!quiet) {
                              std::cerr << "generation " << r.generation << " t=" << r.temperature
                                        << " train=" << r.train_size
                                        << " test_mean_recall=" << fixed6(r.test_mean_recall) << "\n";
                            }
                          }),
                dir};

  json reports = json::array();
  for (const auto& r : out.run.reports) {
    reports.push_back(to_json(r));
    write_text(dir / ("train_log_gen" + std::to_string(r.generation) + ".csv"),
               format_training_log(r.log));
  }
  json doc{{"generations", reports}};
  if (out.run.error) doc["error"] = *out.run.error;
  write_text(dir / "reports.json", doc.dump(2) + "\n");
  write_text(dir / "metrics.csv", format_metrics_csv(out.run.reports));
  return out;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "alpha") return SweepAxis::alpha;
  if (name == "t_min") return SweepAxis::t_min;
  if (name == "t_constant") return SweepAxis::t_constant;
  throw InvalidArgument("axis must be one of alpha, t_min, t_constant (got '" + name + "')");
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::t_min: return "t_min";
    case SweepAxis::t_constant: return "t_constant";
  }
  return "unknown";
}

std::uint64_t sweep_seed(std::uint64_t master, SweepAxis axis, double value) {
  return RngStream(master).derive("sweep").derive(sweep_axis_name(axis) + "=" + shortest(value)).key();
}

SweepResult execute_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values,
                          bool parallel, bool quiet) {
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  struct Job {
    std::string label;
    RunConfig cfg;
  };
  std::vector<Job> jobs;
  for (double v : values) {
    RunConfig cfg = base;
    cfg.seed = sweep_seed(base.seed, axis, v);
    cfg.crest.seed = cfg.seed;
    switch (axis) {
      case SweepAxis::alpha: cfg.crest.alpha = v; break;
      case SweepAxis::t_min: cfg.crest.t_min = v; break;
      case SweepAxis::t_constant:
        cfg.crest.t_constant = v;
        cfg.crest.mode = CrestMode::da_constant;
        break;
    }
    validated(sweep_axis_name(axis), [&] { cfg.crest.validate(); });
    cfg.output_dir = base.output_dir / (sweep_axis_name(axis) + "_" + shortest(v));
    jobs.push_back({shortest(v), std::move(cfg)});
  }
  if (axis == SweepAxis::t_constant) {
    RunConfig cfg = base;
    cfg.crest.mode = CrestMode::crest_plus;
    cfg.seed = RngStream(base.seed).derive("sweep").derive("t_constant=scheduled").key();
    cfg.crest.seed = cfg.seed;
    cfg.output_dir = base.output_dir / "t_constant_scheduled";
    jobs.push_back({"scheduled", std::move(cfg)});
  }

  struct Outcome {
    std::optional<RunOutput> output;
    std::string failure;
  };
  auto run_one = [quiet](const RunConfig& cfg) {
    Outcome o;
    try {
      o.output = execute_run(cfg, quiet);
      if (o.output->run.error) o.failure = *o.output->run.error;
    } catch (const std::exception& e) {
      o.failure = e.what();
    }
    return o;
  };
  std::vector<Outcome> outcomes;
  if (parallel) {
    std::vector<std::future<Outcome>> futures;
    for (const auto& job : jobs) futures.push_back(std::async(std::launch::async, run_one, job.cfg));
    for (auto& f : futures) outcomes.push_back(f.get());
  } else {
    for (const auto& job : jobs) outcomes.push_back(run_one(job.cfg));
  }

  SweepResult result;
  result.summary_csv = "axis,value,mode,seed,generation,temperature,test_mean_recall,unlabeled_mean_recall,status\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    const std::string prefix = sweep_axis_name(axis) + ',' + job.label + ',' +
                               mode_name(job.cfg.crest.mode) + ',' + std::to_string(job.cfg.seed) + ',';
    if (outcomes[i].output) {
      for (const auto& r : outcomes[i].output->run.reports) {
        result.summary_csv += prefix + std::to_string(r.generation) + ',' + fixed6(r.temperature) + ',' +
                              fixed6(r.test_mean_recall) + ',' + fixed6(r.unlabeled_mean_recall) + ",ok\n";
      }
    }
    if (!outcomes[i].failure.empty()) {
      ++result.failures;
      std::string msg = outcomes[i].failure;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      result.summary_csv += prefix + "-1,,,,failed: " + msg + "\n";
    }
  }
  const auto dir = resolve_output_dir(base.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  write_text(dir / "sweep_summary.csv", result.summary_csv);
  return result;
}

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "per_class_bars") return PlotKind::per_class_bars;
  if (name == "recall_over_generations") return PlotKind::recall_over_generations;
  throw InvalidArgument("kind must be per_class_bars or recall_over_generations (got '" + name + "')");
}

namespace {

struct MetricsRow {
  int generation;
  std::string split;
  std::string cls;
  double precision;
  double recall;
};

std::vector<MetricsRow> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("metrics csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"generation", "split", "class", "n_true", "n_pred", "precision", "recall"}) {
    if (!col.contains(need)) throw InvalidArgument(std::string("metrics csv is missing column '") + need + "'");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) throw ParseError(line_no, "too few fields in metrics row");
    try {
      rows.push_back({std::stoi(cells[col["generation"]]), cells[col["split"]], cells[col["class"]],
                      std::stod(cells[col["precision"]]), std::stod(cells[col["recall"]])});
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "malformed number in metrics row");
    }
  }
  return rows;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr double kWidth = 720, kHeight = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

std::string svg_frame(const std::string& title, const std::string& body, const std::string& xlabel) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(kWidth) + "\" height=\"" +
                  f2(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f2(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
  const double plot_h = kHeight - kTop - kBottom;
  for (int i = 0; i <= 4; ++i) {
    const double y = kTop + plot_h * (1.0 - i / 4.0);
    s += "<line x1=\"" + f2(kLeft) + "\" x2=\"" + f2(kWidth - kRight) + "\" y1=\"" + f2(y) + "\" y2=\"" +
         f2(y) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + f2(kLeft - 8) + "\" y=\"" + f2(y + 4) + "\" text-anchor=\"end\">" + f2(i / 4.0) + "</text>\n";
  }
  s += body;
  s += "<text x=\"" + f2(kWidth / 2) + "\" y=\"" + f2(kHeight - 10) + "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace

std::string render_plot_svg(const std::string& metrics_csv, PlotKind kind) {
  const auto rows = parse_metrics(metrics_csv);
  if (rows.empty()) throw InvalidArgument("metrics csv has no rows");
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto y_of = [&](double v) { return kTop + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  if (kind == PlotKind::per_class_bars) {
    int last = 0;
    for (const auto& r : rows) last = std::max(last, r.generation);
    std::vector<MetricsRow> cls;
    for (const auto& r : rows) {
      if (r.generation == last && r.split == "test" && r.cls != "mean") cls.push_back(r);
    }
    if (cls.empty()) throw InvalidArgument("metrics csv has no per-class test rows");
    const double slot = plot_w / static_cast<double>(cls.size());
    const double bar = slot * 0.35;
    std::string body;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      const double x0 = kLeft + slot * static_cast<double>(i) + slot * 0.15;
      body += "<rect x=\"" + f2(x0) + "\" y=\"" + f2(y_of(cls[i].recall)) + "\" width=\"" + f2(bar) +
              "\" height=\"" + f2(kTop + plot_h - y_of(cls[i].recall)) + "\" fill=\"#4c72b0\"/>\n";
      body += "<rect x=\"" + f2(x0 + bar) + "\" y=\"" + f2(y_of(cls[i].precision)) + "\" width=\"" + f2(bar) +
              "\" height=\"" + f2(kTop + plot_h - y_of(cls[i].precision)) + "\" fill=\"#dd8452\"/>\n";
      body += "<text x=\"" + f2(x0 + bar) + "\" y=\"" + f2(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
              cls[i].cls + "</text>\n";
    }
    body += "<rect x=\"" + f2(kWidth - 170) + "\" y=\"30\" width=\"10\" height=\"10\" fill=\"#4c72b0\"/>"
            "<text x=\"" + f2(kWidth - 155) + "\" y=\"39\">recall</text>\n";
    body += "<rect x=\"" + f2(kWidth - 95) + "\" y=\"30\" width=\"10\" height=\"10\" fill=\"#dd8452\"/>"
            "<text x=\"" + f2(kWidth - 80) + "\" y=\"39\">precision</text>\n";
    return svg_frame("Per-class test recall and precision, generation " + std::to_string(last), body,
                     "class (sorted by training count, descending)");
  }

  std::map<std::string, std::vector<std::pair<int, double>>> series;
  int last = 0;
  for (const auto& r : rows) {
    if (r.cls != "mean") continue;
    series[r.split].emplace_back(r.generation, r.recall);
    last = std::max(last, r.generation);
  }
  if (series.empty()) throw InvalidArgument("metrics csv has no summary rows");
  const double span = std::max(1, last);
  auto x_of = [&](int g) { return kLeft + plot_w * (last == 0 ? 0.5 : g / span); };
  const std::map<std::string, std::string> colors{{"test", "#4c72b0"}, {"unlabeled", "#55a868"}};
  std::string body;
  int legend = 0;
  for (const auto& [split, pts] : series) {
    const auto it = colors.find(split);
    const std::string color = it == colors.end() ? "#333333" : it->second;
    std::string path;
    for (const auto& [g, v] : pts) path += (path.empty() ? "M" : " L") + f2(x_of(g)) + " " + f2(y_of(v));
    body += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    for (const auto& [g, v] : pts) {
      body += "<circle cx=\"" + f2(x_of(g)) + "\" cy=\"" + f2(y_of(v)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    body += "<text x=\"" + f2(kWidth - 150) + "\" y=\"" + f2(40 + 16 * legend++) + "\" fill=\"" + color + "\">" +
            split + " mean recall</text>\n";
  }
  for (int g = 0; g <= last; ++g) {
    body += "<text x=\"" + f2(x_of(g)) + "\" y=\"" + f2(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
            std::to_string(g) + "</text>\n";
  }
  return svg_frame("Mean recall over generations", body, "generation");
}

}  // namespace crest
