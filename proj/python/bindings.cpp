// Copyright 2026 The jepamon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jepamon/detect/detectors.hpp"
#include "jepamon/error_model.hpp"
#include "jepamon/errors.hpp"
#include "jepamon/eval/metrics.hpp"
#include "jepamon/pipeline/pipeline.hpp"
#include "jepamon/synth.hpp"

namespace py = pybind11;
using namespace jepamon;

namespace {

py::dict track_to_dict(const ObjectTrack& t) {
  py::dict d;
  d["scene_id"] = t.scene_id;
  d["id"] = t.id;
  d["t0"] = t.t0;
  d["states"] = to_feature_matrix(t);
  if (t.label) d["label"] = *t.label;
  return d;
}

ObjectTrack track_from_dict(const py::dict& d) {
  ObjectTrack t = from_feature_matrix(d["states"].cast<Matrix>(), d["scene_id"].cast<std::string>(),
                                      d["id"].cast<std::string>(),
                                      d.contains("t0") ? d["t0"].cast<std::int64_t>() : 0);
  if (d.contains("label")) t.label = d["label"].cast<int>();
  return t;
}

py::list tracks_to_list(const std::vector<ObjectTrack>& tracks) {
  py::list out;
  for (const auto& t : tracks) out.append(track_to_dict(t));
  return out;
}

eval::ScoredSet scored(std::vector<double> scores, std::vector<int> labels) {
  return {std::move(scores), std::move(labels)};
}

py::dict point_dict(const eval::RocPoint& p) {
  py::dict d;
  d["fpr"] = p.fpr;
  d["tpr"] = p.tpr;
  d["threshold"] = p.threshold;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "jepamon: masked-latent track embeddings and anomaly detection";

  py::register_exception<Error>(m, "JepamonError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "simulate",
      [](int n_train_scenes, int n_test_scenes, std::uint64_t seed) {
        const LabeledDataset d = generate_dataset(SceneConfig{}, n_train_scenes, n_test_scenes, seed);
        return py::make_tuple(tracks_to_list(d.train), tracks_to_list(d.test));
      },
      py::arg("n_train_scenes"), py::arg("n_test_scenes"), py::arg("seed") = 0,
      "Synthetic train and test tracks with the default scene settings.");

  m.def(
      "build_eval_set",
      [](const py::list& test, double mu, double sigma, const std::string& feature, std::uint64_t seed,
         bool paired) {
        std::vector<ObjectTrack> tracks;
        for (const auto& t : test) tracks.push_back(track_from_dict(t.cast<py::dict>()));
        ErrorSpec spec;
        spec.feature = parse_feature(feature);
        spec.mu = mu;
        spec.sigma = sigma;
        return tracks_to_list(build_eval_set(tracks, spec, seed, paired).data.test);
      },
      py::arg("test"), py::arg("mu") = 5.0, py::arg("sigma") = 0.1, py::arg("feature") = "v",
      py::arg("seed") = 0, py::arg("paired") = false);

  py::class_<detect::FittedDetector>(m, "Detector")
      .def(py::init([](const std::string& kind, const Matrix& train, std::uint64_t seed, double quantile) {
             detect::DetectorOptions o;
             o.seed = seed;
             o.threshold_quantile = quantile;
             return detect::FittedDetector::fit(detect::parse_detector(kind), train, o);
           }),
           py::arg("kind"), py::arg("train"), py::arg("seed") = 0, py::arg("quantile") = 0.99)
      .def_property_readonly("kind", [](const detect::FittedDetector& d) {
        return std::string(detect::detector_name(d.kind()));
      })
      .def_property_readonly("threshold", &detect::FittedDetector::threshold)
      .def_property_readonly("train_scores", &detect::FittedDetector::train_scores)
      .def("score", &detect::FittedDetector::score_all, py::arg("points"))
      .def("predict", [](const detect::FittedDetector& d, const Matrix& points) {
        std::vector<int> out;
        for (double s : d.score_all(points)) out.push_back(d.predict(s));
        return out;
      });

  m.def(
      "roc_curve",
      [](std::vector<double> scores, std::vector<int> labels) {
        const auto c = eval::roc_curve(scored(std::move(scores), std::move(labels)));
        std::vector<double> fpr, tpr, thr;
        for (const auto& p : c) {
          fpr.push_back(p.fpr);
          tpr.push_back(p.tpr);
          thr.push_back(p.threshold);
        }
        return py::make_tuple(fpr, tpr, thr);
      },
      py::arg("scores"), py::arg("labels"), "Returns (fpr, tpr, thresholds).");
  m.def(
      "auroc", [](std::vector<double> s, std::vector<int> y) { return eval::auroc(scored(std::move(s), std::move(y))); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "operating_points",
      [](std::vector<double> s, std::vector<int> y) {
        const auto c = eval::roc_curve(scored(std::move(s), std::move(y)));
        py::dict d;
        d["fpr95"] = point_dict(eval::fpr_at_tpr(c, 0.95));
        d["tpr5"] = point_dict(eval::tpr_at_fpr(c, 0.05));
        d["tpr1"] = point_dict(eval::tpr_at_fpr(c, 0.01));
        d["youden"] = point_dict(eval::youden_point(c));
        return d;
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "confusion_metrics",
      [](std::vector<double> s, std::vector<int> y, double threshold) {
        const auto r = eval::confusion_metrics(scored(std::move(s), std::move(y)), threshold);
        py::dict d;
        d["tp"] = r.counts.tp;
        d["fp"] = r.counts.fp;
        d["fn"] = r.counts.fn;
        d["tn"] = r.counts.tn;
        d["f1"] = r.f1;
        d["mcc"] = r.mcc;
        d["accuracy"] = r.accuracy;
        d["tpr"] = r.tpr;
        d["fpr"] = r.fpr;
        d["precision"] = r.precision;
        return d;
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold"), "Flags scores strictly above threshold.");

  m.def("default_config", [] { return pipeline::to_json(pipeline::PipelineConfig{}).dump(); });
  m.def(
      "reproduce",
      [](const std::string& config_json, const std::string& run_dir) {
        const auto config = pipeline::config_from_json(nlohmann::json::parse(config_json));
        const pipeline::RunDir run{run_dir};
        pipeline::write_snapshot(run, config);
        py::gil_scoped_release release;
        return pipeline::to_json(pipeline::cmd_reproduce(config, run)).dump();
      },
      py::arg("config_json"), py::arg("run_dir"), "Runs the full experiment; returns the result as JSON text.");
}
