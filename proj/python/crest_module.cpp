#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "crest/crest_loop.hpp"
#include "crest/data.hpp"
#include "crest/errors.hpp"
#include "crest/harness.hpp"
#include "crest/metrics.hpp"
#include "crest/model.hpp"
#include "crest/rebalance.hpp"

namespace py = pybind11;
using namespace crest;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::tuple from_dataset(const Dataset& d) {
  Matrix x({d.size(), d.dim()});
  std::copy(d.features().begin(), d.features().end(), x.mutable_data());
  return py::make_tuple(x, d.labels());
}

py::dict stats_dict(const PerClassStats& s) {
  py::dict out;
  out["precision"] = s.precision;
  out["recall"] = s.recall;
  out["precision_defined"] = s.precision_defined;
  out["recall_defined"] = s.recall_defined;
  out["n_true"] = s.n_true;
  out["n_pred"] = s.n_pred;
  return out;
}

Parameters params_from(const ModelDims& dims, const std::vector<double>& values) {
  Parameters p(dims);
  if (values.size() != p.size()) {
    throw InvalidArgument("expected " + std::to_string(p.size()) + " parameters, got " +
                          std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), p.values().begin());
  return p;
}

nlohmann::json parse_doc(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_crest, m) {
  m.doc() = "Class-rebalancing self-training core";
  m.attr("__version__") = kVersion;

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("longtail_counts",
        [](std::size_t num_classes, double gamma, long n1) { return build_longtail_profile(num_classes, gamma, n1).counts(); },
        py::arg("num_classes"), py::arg("gamma"), py::arg("n1"));

  m.def("synth_dataset",
        [](const std::vector<long>& counts, std::size_t dim, double separation, double noise_sigma,
           std::uint64_t seed, std::uint64_t sample_stream) {
          return from_dataset(synth_gaussian_dataset(ClassProfile(counts), SynthParams{dim, separation, noise_sigma},
                                                     seed, sample_stream));
        },
        py::arg("counts"), py::arg("dim") = 16, py::arg("separation") = 4.0, py::arg("noise_sigma") = 1.0,
        py::arg("seed") = 0, py::arg("sample_stream") = 0);

  m.def("split_indices",
        [](const std::vector<int>& labels, std::size_t num_classes, double beta, std::uint64_t seed) {
          const Dataset d(1, num_classes, std::vector<double>(labels.size(), 0.0), labels);
          const auto s = split_labeled_unlabeled(d, beta, seed);
          return py::make_tuple(s.labeled_source, s.unlabeled_source);
        },
        py::arg("labels"), py::arg("num_classes"), py::arg("beta"), py::arg("seed") = 0);

  m.def("resample_weights",
        [](const std::vector<long>& counts) {
          const auto w = resample_weights(ClassProfile(counts));
          return py::make_tuple(w.per_example, w.class_mass);
        },
        py::arg("counts"));

  m.def("sampling_rates",
        [](const std::vector<long>& counts, double alpha) { return sampling_rates(ClassProfile(counts), alpha); },
        py::arg("counts"), py::arg("alpha"));

  m.def("select_pseudo_labeled",
        [](const std::vector<int>& labels, const std::vector<double>& confidences, const std::vector<double>& rates) {
          if (labels.size() != confidences.size()) throw InvalidArgument("labels and confidences differ in length");
          std::vector<PseudoLabel> pls(labels.size());
          for (std::size_t i = 0; i < labels.size(); ++i) pls[i] = PseudoLabel{i, labels[i], confidences[i], {}};
          const auto sel = select_pseudo_labeled(pls, rates);
          std::vector<std::size_t> chosen;
          for (const auto& p : sel.chosen) chosen.push_back(p.index);
          return chosen;
        },
        py::arg("labels"), py::arg("confidences"), py::arg("rates"),
        "Indices of the kept predictions, grouped by class, most confident first.");

  m.def("temperature_schedule", &temperature_schedule, py::arg("generation"), py::arg("final_generation"),
        py::arg("t_min"));
  m.def("scaled_target",
        [](const std::vector<double>& p, double t) { return scaled_target(p, t); }, py::arg("p"), py::arg("t"));
  m.def("align",
        [](const std::vector<double>& q, const std::vector<double>& target, const std::vector<double>& marginal) {
          if (q.size() != target.size() || q.size() != marginal.size()) throw InvalidArgument("alignment shape mismatch");
          std::vector<double> out = q;
          align_inplace(out, target, marginal);
          return out;
        },
        py::arg("q"), py::arg("target"), py::arg("marginal"));

  m.def("parameter_count",
        [](std::size_t input, std::size_t hidden, std::size_t classes) {
          return ModelDims{input, hidden, classes}.parameter_count();
        },
        py::arg("input"), py::arg("hidden"), py::arg("classes"));
  m.def("init_params",
        [](std::size_t input, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
          const auto model = init_model(ModelDims{input, hidden, classes}, seed);
          return std::vector<double>(model.params.values().begin(), model.params.values().end());
        },
        py::arg("input"), py::arg("hidden"), py::arg("classes"), py::arg("seed") = 0);
  m.def("predict_proba",
        [](const std::vector<double>& params, std::size_t hidden, std::size_t classes, const Matrix& x) {
          if (x.ndim() != 2) throw InvalidArgument("x must be a 2-d array");
          const ModelDims dims{static_cast<std::size_t>(x.shape(1)), hidden, classes};
          const auto p = params_from(dims, params);
          const auto probs =
              predict_proba_batch(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
          Matrix out({static_cast<std::size_t>(x.shape(0)), classes});
          std::copy(probs.begin(), probs.end(), out.mutable_data());
          return out;
        },
        py::arg("params"), py::arg("hidden"), py::arg("classes"), py::arg("x"));
  m.def("grad_check",
        [](const std::vector<double>& params, std::size_t hidden, std::size_t classes, const Matrix& x,
           const std::vector<int>& labels, std::optional<std::vector<double>> weights) {
          if (x.ndim() != 2) throw InvalidArgument("x must be a 2-d array");
          const ModelDims dims{static_cast<std::size_t>(x.shape(1)), hidden, classes};
          const auto w = weights.value_or(std::vector<double>(labels.size(), 1.0));
          return grad_check(params_from(dims, params),
                            std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), labels, w);
        },
        py::arg("params"), py::arg("hidden"), py::arg("classes"), py::arg("x"), py::arg("labels"),
        py::arg("weights") = py::none());

  m.def("confusion",
        [](const std::vector<int>& preds, const std::vector<int>& truths, std::size_t num_classes) {
          const auto cm = confusion(preds, truths, num_classes);
          py::array_t<long> out({num_classes, num_classes});
          auto r = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < num_classes; ++i) {
            for (std::size_t j = 0; j < num_classes; ++j) r(i, j) = cm.at(i, j);
          }
          return out;
        },
        py::arg("preds"), py::arg("truths"), py::arg("num_classes"));
  m.def("per_class_stats",
        [](const std::vector<int>& preds, const std::vector<int>& truths, std::size_t num_classes) {
          return stats_dict(per_class_precision_recall(confusion(preds, truths, num_classes)));
        },
        py::arg("preds"), py::arg("truths"), py::arg("num_classes"));
  m.def("mean_recall",
        [](const std::vector<int>& preds, const std::vector<int>& truths, std::size_t num_classes) {
          return mean_recall(confusion(preds, truths, num_classes));
        },
        py::arg("preds"), py::arg("truths"), py::arg("num_classes"));
  m.def("spearman",
        [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); }, py::arg("a"),
        py::arg("b"));

  m.def("resolve_config",
        [](const std::string& text) { return to_json(parse_run_config(parse_doc(text))).dump(); },
        py::arg("config_json"), "Validate a run config and return it fully resolved, as JSON text.");
  m.def("run_reports",
        [](const std::string& text) {
          const auto cfg = parse_run_config(parse_doc(text));
          CrestRun run;
          {
            py::gil_scoped_release release;
            const auto data = prepare_data(cfg);
            run = run_crest(data.split, data.test, cfg.crest);
          }
          nlohmann::json doc{{"generations", nlohmann::json::array()}};
          for (const auto& r : run.reports) doc["generations"].push_back(to_json(r));
          if (run.error) doc["error"] = *run.error;
          return doc.dump();
        },
        py::arg("config_json"), "Run in memory and return the generation reports as JSON text.");
  m.def("execute_run",
        [](const std::string& text) {
          const auto cfg = parse_run_config(parse_doc(text));
          py::gil_scoped_release release;
          const auto out = execute_run(cfg);
          if (out.run.error) throw std::runtime_error(*out.run.error);
          return out.directory;
        },
        py::arg("config_json"), "Run and write manifest, reports, metrics and logs; returns the output directory.");
  m.def("render_plot_svg",
        [](const std::string& csv, const std::string& kind) { return render_plot_svg(csv, parse_plot_kind(kind)); },
        py::arg("metrics_csv"), py::arg("kind"));
}
