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

#include "jepamon/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "jepamon/errors.hpp"
#include "jepamon/track_io.hpp"

namespace jepamon::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void say(const Progress& progress, const std::string& message) {
  if (progress) progress(message);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void require_file(const fs::path& path, const std::string& produced_by) {
  if (!fs::exists(path)) {
    throw Error("missing " + path.string() + " (run '" + produced_by + "' first)");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Every key of `given` must exist in `reference`; objects are checked recursively.
void check_keys(const json& given, const json& reference, const std::string& where) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    if (reference[key].is_object()) {
      if (!value.is_object()) throw ConfigError("config: '" + path + "' must be an object");
      check_keys(value, reference[key], path);
    }
  }
}

json without_seed(json j) {
  j.erase("seed");
  return j;
}

}  // namespace

// --------------------------------------------------------------- Config

void PipelineConfig::validate() const {
  simulator.scene.validate();
  if (simulator.n_train_scenes < 1 || simulator.n_test_scenes < 1) {
    throw ConfigError("simulator: scene counts must be positive");
  }
  error_spec(error.mu, 0).validate();
  for (double mu : error.severity_mus) error_spec(mu, 0).validate();
  train.train.validate();
  train.encoder.validate();
  train.predictor.validate(train.encoder.embed_dim);
  if (detector_kinds().empty()) throw ConfigError("detector: no detector kinds");
  if (detector.abod_max_reference < 3) throw ConfigError("detector: abod_max_reference must be >= 3");
  if (detector.lof_neighbors < 1) throw ConfigError("detector: lof_neighbors must be positive");
  if (detector.gmm_components < 1) throw ConfigError("detector: gmm_components must be positive");
  if (!(detector.threshold_quantile >= 0.0 && detector.threshold_quantile <= 1.0)) {
    throw ConfigError("detector: threshold_quantile must lie in [0, 1]");
  }
  if (detector.baseline_length < 1) throw ConfigError("detector: baseline_length must be positive");
  if (eval.histogram_bins < 1) throw ConfigError("eval: histogram_bins must be positive");
  if (eval.n_seeds < 1) throw ConfigError("eval: n_seeds must be positive");
}

std::vector<detect::DetectorKind> PipelineConfig::detector_kinds() const {
  std::vector<detect::DetectorKind> kinds;
  for (const auto& name : detector.kinds) {
    const auto k = detect::parse_detector(name);
    if (std::find(kinds.begin(), kinds.end(), k) != kinds.end()) {
      throw ConfigError("detector: kind '" + name + "' listed twice");
    }
    kinds.push_back(k);
  }
  return kinds;
}

detect::DetectorOptions PipelineConfig::detector_options(std::uint64_t seed) const {
  detect::DetectorOptions o;
  o.abod_max_reference = detector.abod_max_reference;
  o.lof_neighbors = detector.lof_neighbors;
  o.gmm_components = detector.gmm_components;
  o.threshold_quantile = detector.threshold_quantile;
  o.seed = seed;
  return o;
}

ErrorSpec PipelineConfig::error_spec(double mu, std::uint64_t seed) const {
  ErrorSpec s;
  try {
    s.feature = parse_feature(error.feature);
  } catch (const Error& e) {
    throw ConfigError(std::string("error: ") + e.what());
  }
  s.mu = mu;
  s.sigma = error.sigma;
  s.seed = seed;
  return s;
}

ordered_json to_json(const PipelineConfig& c) {
  json scene = without_seed(json(c.simulator.scene));
  json train = without_seed(json(c.train.train));
  train["encoder"] = json(c.train.encoder);
  train["predictor"] = json(c.train.predictor);
  ordered_json j;
  j["seed"] = c.seed;
  j["simulator"] = {{"n_train_scenes", c.simulator.n_train_scenes},
                    {"n_test_scenes", c.simulator.n_test_scenes},
                    {"scene", scene}};
  j["error"] = {{"feature", c.error.feature},
                {"mu", c.error.mu},
                {"sigma", c.error.sigma},
                {"paired", c.error.paired},
                {"severity_mus", c.error.severity_mus}};
  j["train"] = train;
  j["detector"] = {{"kinds", c.detector.kinds},
                   {"abod_max_reference", c.detector.abod_max_reference},
                   {"lof_neighbors", c.detector.lof_neighbors},
                   {"gmm_components", c.detector.gmm_components},
                   {"threshold_quantile", c.detector.threshold_quantile},
                   {"baseline_length", c.detector.baseline_length}};
  j["eval"] = {{"histogram_bins", c.eval.histogram_bins}, {"n_seeds", c.eval.n_seeds}};
  return j;
}

PipelineConfig config_from_json(const json& given) {
  if (!given.is_object()) throw ConfigError("config: top level must be an object");
  const json defaults = json(to_json(PipelineConfig{}));
  check_keys(given, defaults, "");
  json doc = defaults;
  doc.merge_patch(given);
  PipelineConfig c;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
    const json& sim = doc.at("simulator");
    c.simulator.n_train_scenes = sim.at("n_train_scenes").get<int>();
    c.simulator.n_test_scenes = sim.at("n_test_scenes").get<int>();
    c.simulator.scene = sim.at("scene").get<SceneConfig>();
    const json& err = doc.at("error");
    c.error.feature = err.at("feature").get<std::string>();
    c.error.mu = err.at("mu").get<double>();
    c.error.sigma = err.at("sigma").get<double>();
    c.error.paired = err.at("paired").get<bool>();
    c.error.severity_mus = err.at("severity_mus").get<std::vector<double>>();
    json train = doc.at("train");
    c.train.encoder = train.at("encoder").get<jepa::EncoderConfig>();
    c.train.predictor = train.at("predictor").get<jepa::PredictorConfig>();
    train.erase("encoder");
    train.erase("predictor");
    c.train.train = train.get<jepa::TrainConfig>();
    const json& det = doc.at("detector");
    c.detector.kinds = det.at("kinds").get<std::vector<std::string>>();
    c.detector.abod_max_reference = det.at("abod_max_reference").get<std::size_t>();
    c.detector.lof_neighbors = det.at("lof_neighbors").get<int>();
    c.detector.gmm_components = det.at("gmm_components").get<int>();
    c.detector.threshold_quantile = det.at("threshold_quantile").get<double>();
    c.detector.baseline_length = det.at("baseline_length").get<int>();
    const json& ev = doc.at("eval");
    c.eval.histogram_bins = ev.at("histogram_bins").get<int>();
    c.eval.n_seeds = ev.at("n_seeds").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  const json defaults = json(to_json(PipelineConfig{}));
  json* node = &doc;
  const json* ref = &defaults;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!ref->is_object() || !ref->contains(part)) throw ConfigError("override: unknown key '" + key + "'");
    ref = &(*ref)[part];
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::uint64_t stage_seed(std::uint64_t global, Stage stage) {
  return derive_seed(global, {static_cast<std::uint64_t>(stage)});
}

std::uint64_t run_seed(std::uint64_t global, Stage stage, int run) {
  return derive_seed(global, {static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(run)});
}

RunDir resolve_run_dir(const std::optional<fs::path>& explicit_dir, std::uint64_t seed) {
  if (explicit_dir) return RunDir{*explicit_dir};
  const char* root = std::getenv("JEPAMON_RUN_ROOT");
  return RunDir{fs::path(root && *root ? root : "runs") / ("seed-" + std::to_string(seed))};
}

void write_snapshot(const RunDir& run, const PipelineConfig& config) {
  const std::string text = to_json(config).dump(2) + "\n";
  if (fs::exists(run.snapshot())) {
    if (read_text(run.snapshot()) != text) {
      throw ConfigError("run directory " + run.root.string() +
                        " was created with a different config; use a new run directory");
    }
    return;
  }
  write_text(run.snapshot(), text);
}

// ----------------------------------------------------------- Embeddings

void save_embeddings(std::span<const jepa::Embedding> embeddings, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : embeddings) {
    ordered_json j;
    j["scene_id"] = e.scene_id;
    j["id"] = e.track_id;
    j["checkpoint"] = e.checkpoint_id;
    j["dim"] = e.tokens.cols();
    if (e.label) j["label"] = *e.label;
    ordered_json tokens = ordered_json::array();
    for (Eigen::Index t = 0; t < e.tokens.rows(); ++t) {
      tokens.push_back(std::vector<double>(e.tokens.row(t).begin(), e.tokens.row(t).end()));
    }
    j["tokens"] = std::move(tokens);
    out << j.dump() << '\n';
  }
}

std::vector<jepa::Embedding> load_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<jepa::Embedding> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      jepa::Embedding e;
      e.scene_id = j.at("scene_id").get<std::string>();
      e.track_id = j.at("id").get<std::string>();
      e.checkpoint_id = j.at("checkpoint").get<std::string>();
      const int dim = j.at("dim").get<int>();
      if (j.contains("label")) e.label = j.at("label").get<int>();
      const json& tokens = j.at("tokens");
      if (tokens.empty()) throw ParseError("empty token list", line_no);
      e.tokens.resize(static_cast<Eigen::Index>(tokens.size()), dim);
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto row = tokens[t].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != dim) {
          throw SchemaError("embeddings line " + std::to_string(line_no) + ": token width " +
                            std::to_string(row.size()) + " does not match dim " + std::to_string(dim));
        }
        for (int d = 0; d < dim; ++d) e.tokens(static_cast<Eigen::Index>(t), d) = row[d];
      }
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(path.string() + ": " + ex.what(), line_no);
    }
  }
  return out;
}

Matrix summary_matrix(std::span<const jepa::Embedding> embeddings) {
  if (embeddings.empty()) throw Error("no embeddings");
  const Eigen::Index dim = embeddings.front().tokens.cols();
  Matrix m(static_cast<Eigen::Index>(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].tokens.cols() != dim) throw SchemaError("embeddings have mixed dimensions");
    m.row(static_cast<Eigen::Index>(i)) = detect::summarize(embeddings[i].tokens);
  }
  return m;
}

// --------------------------------------------------------------- Scores

std::string track_key(const ObjectTrack& track) { return track.scene_id + "/" + track.id; }

void save_scores(std::span<const ScoreRow> rows, const fs::path& path) {
  std::ostringstream out;
  out << "track_id,label,detector,score,prediction\n";
  for (const auto& r : rows) {
    out << r.track_id << ',' << (r.label ? std::to_string(*r.label) : std::string()) << ','
        << r.detector << ',' << fmt(r.score) << ',' << r.prediction << '\n';
  }
  write_text(path, out.str());
}

std::vector<ScoreRow> load_scores(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "track_id,label,detector,score,prediction") {
    throw ParseError(path.string() + ": unexpected header", 1);
  }
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 5) throw ParseError(path.string() + ": expected 5 columns", line_no);
    try {
      ScoreRow r;
      r.track_id = f[0];
      if (!f[1].empty()) r.label = std::stoi(f[1]);
      r.detector = f[2];
      r.score = std::stod(f[3]);
      r.prediction = std::stoi(f[4]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError(path.string() + ": malformed number", line_no);
    }
  }
  return rows;
}

// ------------------------------------------------------------- Commands

namespace {

std::vector<ObjectTrack> labeled_only(std::span<const ObjectTrack> tracks, int label) {
  std::vector<ObjectTrack> out;
  for (const auto& t : tracks) {
    if (t.label && *t.label == label) out.push_back(t);
  }
  return out;
}

std::vector<ScoreRow> score_rows(std::span<const ObjectTrack> tracks, const detect::FittedDetector& det,
                                 std::span<const double> scores) {
  std::vector<ScoreRow> rows;
  rows.reserve(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    rows.push_back({track_key(tracks[i]), tracks[i].label, std::string(detect::detector_name(det.kind())),
                    scores[i], det.predict(scores[i])});
  }
  return rows;
}

eval::ScoredSet scored_set(std::span<const ObjectTrack> tracks, std::span<const double> scores) {
  eval::ScoredSet s;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!tracks[i].label) throw Error("evaluation track " + track_key(tracks[i]) + " has no label");
    s.scores.push_back(scores[i]);
    s.labels.push_back(*tracks[i].label);
  }
  return s;
}

std::string stem(std::string_view source, detect::DetectorKind kind) {
  return std::string(source) + "-" + std::string(detect::detector_name(kind));
}

void write_detector_meta(const fs::path& path, std::string_view source,
                         const detect::FittedDetector& det, double quantile) {
  ordered_json j{{"detector", detect::detector_name(det.kind())},
                 {"source", source},
                 {"dimension", det.dimension()},
                 {"threshold", det.threshold()},
                 {"threshold_quantile", quantile},
                 {"n_train", det.train_scores().size()}};
  write_text(path, j.dump(2) + "\n");
}

// Writes one report (JSON, ROC CSV, histogram CSV) under `dir`.
void write_report_files(const fs::path& dir, const std::string& name, const eval::EvalReport& r) {
  write_text(dir / (name + ".json"), json(eval::to_json(r)).dump(2) + "\n");
  fs::create_directories(dir);
  eval::write_roc_csv(dir / (name + "-roc.csv"), r.roc);
  eval::write_histogram_csv(dir / (name + "-hist.csv"), r.histogram);
}

jepa::Checkpoint train_run(const PipelineConfig& config, std::span<const ObjectTrack> train_tracks,
                           std::uint64_t seed, const Progress& progress, const std::string& tag) {
  jepa::TrainConfig tc = config.train.train;
  tc.seed = seed;
  jepa::Checkpoint ck = jepa::init_checkpoint(train_tracks, tc, config.train.encoder, config.train.predictor);
  jepa::train(ck, train_tracks, [&](int epoch, double loss) {
    if (epoch == 0) say(progress, tag + "initial loss " + fmt(ck.initial_loss));
    if (epoch == 0 || (epoch + 1) % 10 == 0 || epoch + 1 == tc.epochs) {
      say(progress, tag + "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(tc.epochs) +
                        " loss " + fmt(loss));
    }
  });
  return ck;
}

}  // namespace

void cmd_simulate(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  SceneConfig scene = config.simulator.scene;
  const LabeledDataset data = generate_dataset(scene, config.simulator.n_train_scenes,
                                               config.simulator.n_test_scenes,
                                               stage_seed(config.seed, Stage::kSimulate));
  fs::create_directories(run.dataset());
  save_tracks(data.train, run.train_tracks());
  save_tracks(data.test, run.test_tracks());
  say(progress, "simulated " + std::to_string(data.train.size()) + " train and " +
                    std::to_string(data.test.size()) + " test tracks");
}

void cmd_inject(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  require_file(run.test_tracks(), "simulate");
  const auto test = load_tracks(run.test_tracks());
  const EvalSet set = build_eval_set(test, config.error_spec(config.error.mu, 0),
                                     stage_seed(config.seed, Stage::kInject), config.error.paired);
  save_tracks(set.data.test, run.eval_tracks());
  save_injection_records(set.records, run.injections());
  say(progress, "eval set: " + std::to_string(set.data.test.size()) + " tracks, " +
                    std::to_string(set.records.size()) + " anomalous");
}

void cmd_train(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  require_file(run.train_tracks(), "simulate");
  const auto train = load_tracks(run.train_tracks());
  const jepa::Checkpoint ck = train_run(config, train, run_seed(config.seed, Stage::kTrain, 0), progress, "");
  jepa::save_checkpoint(ck, run.checkpoint());
  say(progress, "checkpoint " + ck.id());
}

void cmd_embed(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  require_file(run.train_tracks(), "simulate");
  require_file(run.eval_tracks(), "inject");
  require_file(run.checkpoint() / "checkpoint.json", "train");
  const jepa::Checkpoint ck = jepa::load_checkpoint(run.checkpoint());
  save_embeddings(jepa::embed_all(load_tracks(run.train_tracks()), ck), run.embeddings() / "train.ndjson");
  save_embeddings(jepa::embed_all(load_tracks(run.eval_tracks()), ck), run.embeddings() / "eval.ndjson");
  say(progress, "embedded train and eval tracks with checkpoint " + ck.id());
}

void cmd_detect(const PipelineConfig& config, const RunDir& run, DetectInput input,
                const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  require_file(run.train_tracks(), "simulate");
  require_file(run.eval_tracks(), "inject");
  const auto train = load_tracks(run.train_tracks());
  const auto test = load_tracks(run.eval_tracks());
  const std::uint64_t seed = run_seed(config.seed, Stage::kDetect, 0);
  const auto options = config.detector_options(seed);
  fs::create_directories(run.scores());

  if (input == DetectInput::kRaw) {
    for (const auto kind : config.detector_kinds()) {
      const auto result = detect::baseline_detect(train, test, kind, options, config.detector.baseline_length);
      const std::string name = stem("baseline", kind);
      save_scores(score_rows(test, result.detector, result.scores), run.scores() / (name + ".csv"));
      write_detector_meta(run.scores() / (name + ".json"), "baseline", result.detector,
                          config.detector.threshold_quantile);
      say(progress, name + ": threshold " + fmt(result.detector.threshold()));
    }
    return;
  }

  require_file(run.embeddings() / "train.ndjson", "embed");
  require_file(run.embeddings() / "eval.ndjson", "embed");
  require_file(run.checkpoint() / "checkpoint.json", "train");
  const jepa::Checkpoint ck = jepa::load_checkpoint(run.checkpoint());
  const auto train_emb = load_embeddings(run.embeddings() / "train.ndjson");
  const auto test_emb = load_embeddings(run.embeddings() / "eval.ndjson");
  for (const auto* set : {&train_emb, &test_emb}) {
    for (const auto& e : *set) {
      if (e.tokens.cols() != ck.embed_dim()) {
        throw SchemaError("embedding " + e.scene_id + "/" + e.track_id + " has dimension " +
                          std::to_string(e.tokens.cols()) + " but the checkpoint embeds to " +
                          std::to_string(ck.embed_dim()));
      }
      if (e.checkpoint_id != ck.id()) {
        throw SchemaError("embedding " + e.scene_id + "/" + e.track_id + " was produced by checkpoint " +
                          e.checkpoint_id + ", not " + ck.id());
      }
    }
  }
  if (train_emb.size() != train.size() || test_emb.size() != test.size()) {
    throw SchemaError("embedding files do not match the dataset track counts");
  }
  const Matrix xtrain = summary_matrix(train_emb);
  const Matrix xtest = summary_matrix(test_emb);
  for (const auto kind : config.detector_kinds()) {
    const auto det = detect::FittedDetector::fit(kind, xtrain, options);
    const auto scores = det.score_all(xtest);
    const std::string name = stem("embedding", kind);
    save_scores(score_rows(test, det, scores), run.scores() / (name + ".csv"));
    write_detector_meta(run.scores() / (name + ".json"), "embedding", det, config.detector.threshold_quantile);
    say(progress, name + ": threshold " + fmt(det.threshold()));
  }
}

void cmd_evaluate(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  write_snapshot(run, config);
  if (!fs::exists(run.scores())) throw Error("missing " + run.scores().string() + " (run 'detect' first)");
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(run.scores())) {
    if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw Error("no score files in " + run.scores().string());
  ordered_json summary = ordered_json::array();
  std::vector<std::pair<std::string, std::string>> rocs, hists;
  for (const auto& csv : csvs) {
    const std::string name = csv.stem().string();
    const fs::path meta_path = run.scores() / (name + ".json");
    require_file(meta_path, "detect");
    const json meta = json::parse(read_text(meta_path));
    const auto rows = load_scores(csv);
    eval::ScoredSet s;
    for (const auto& r : rows) {
      if (!r.label) throw Error(csv.string() + ": track " + r.track_id + " has no label");
      s.scores.push_back(r.score);
      s.labels.push_back(*r.label);
    }
    const auto report = eval::build_report(s, meta.at("detector").get<std::string>(),
                                           meta.at("source").get<std::string>(),
                                           meta.at("threshold").get<double>(), config.eval.histogram_bins);
    write_report_files(run.report(), name, report);
    rocs.emplace_back(name, name + "-roc.csv");
    hists.emplace_back(name + "-hist", name + "-hist.csv");
    summary.push_back({{"name", name},
                       {"auroc", report.auroc},
                       {"fpr95", report.points.fpr95.fpr},
                       {"tpr5", report.points.tpr5.tpr},
                       {"tpr1", report.points.tpr1.tpr},
                       {"f1", report.at_threshold.f1},
                       {"mcc", report.at_threshold.mcc},
                       {"accuracy", report.at_threshold.accuracy}});
    say(progress, name + ": AUROC " + fmt(report.auroc));
  }
  write_text(run.report() / "summary.json", summary.dump(2) + "\n");
  eval::write_gnuplot_script(run.report() / "plots.gnuplot", rocs, hists);
}

// ------------------------------------------------------------ Reproduce

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); 0 for a single value.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::map<std::string, double> table_values(const eval::EvalReport& r) {
  return {{"AUROC", r.auroc},
          {"F1", r.at_threshold.f1},
          {"MCC", r.at_threshold.mcc},
          {"Acc", r.at_threshold.accuracy},
          {"FPR95", r.points.fpr95.fpr},
          {"TPR5", r.points.tpr5.tpr},
          {"TPR1", r.points.tpr1.tpr}};
}

std::vector<double> column_std(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  const RowVector mean = m.colwise().mean();
  for (Eigen::Index d = 0; d < m.cols(); ++d) {
    out[static_cast<std::size_t>(d)] =
        std::sqrt((m.col(d).array() - mean[d]).square().sum() / static_cast<double>(m.rows()));
  }
  return out;
}

}  // namespace

ReproduceResult cmd_reproduce(const PipelineConfig& config, const RunDir& run, const Progress& progress) {
  config.validate();
  cmd_simulate(config, run, progress);
  cmd_inject(config, run, progress);
  const auto train = load_tracks(run.train_tracks());
  const auto test_raw = load_tracks(run.test_tracks());
  const auto eval_tracks = load_tracks(run.eval_tracks());
  const auto kinds = config.detector_kinds();

  // Severity sets share the inject seed, so the same tracks and timesteps are
  // corrupted and only the error magnitude changes.
  std::vector<std::vector<ObjectTrack>> severity_anomalies;
  for (double mu : config.error.severity_mus) {
    const EvalSet set = build_eval_set(test_raw, config.error_spec(mu, 0),
                                       stage_seed(config.seed, Stage::kInject), config.error.paired);
    severity_anomalies.push_back(labeled_only(set.data.test, 1));
  }

  ReproduceResult result;
  result.n_train_tracks = train.size();
  result.n_test_tracks = eval_tracks.size();
  for (int k = 0; k < config.eval.n_seeds; ++k) {
    const std::string tag = "seed " + std::to_string(k + 1) + "/" + std::to_string(config.eval.n_seeds) + ": ";
    const std::string sub = "seed-" + std::to_string(k);
    SeedResult sr;
    sr.run = k;
    sr.seed = run_seed(config.seed, Stage::kTrain, k);
    const jepa::Checkpoint ck = train_run(config, train, sr.seed, progress, tag);
    jepa::save_checkpoint(ck, run.checkpoint() / sub);
    sr.checkpoint_id = ck.id();
    sr.epoch_losses = ck.epoch_losses;
    sr.initial_loss = ck.initial_loss;

    const Matrix xtrain = summary_matrix(jepa::embed_all(train, ck));
    const Matrix xtest = summary_matrix(jepa::embed_all(eval_tracks, ck));
    sr.summary_std = column_std(xtrain);
    std::vector<Matrix> xseverity;
    for (const auto& set : severity_anomalies) xseverity.push_back(summary_matrix(jepa::embed_all(set, ck)));

    const auto options = config.detector_options(run_seed(config.seed, Stage::kDetect, k));
    for (const auto kind : kinds) {
      const std::string dname(detect::detector_name(kind));
      const auto det = detect::FittedDetector::fit(kind, xtrain, options);
      const auto scores = det.score_all(xtest);
      save_scores(score_rows(eval_tracks, det, scores), run.scores() / sub / (stem("embedding", kind) + ".csv"));
      auto report = eval::build_report(scored_set(eval_tracks, scores), dname, "embedding", det.threshold(),
                                       config.eval.histogram_bins);
      write_report_files(run.report() / sub, stem("embedding", kind), report);
      sr.embedding_reports.push_back(std::move(report));
      auto& medians = sr.severity_medians[dname];
      for (const auto& xs : xseverity) medians.push_back(eval::median(det.score_all(xs)));

      const auto base = detect::baseline_detect(train, eval_tracks, kind, options, config.detector.baseline_length);
      save_scores(score_rows(eval_tracks, base.detector, base.scores),
                  run.scores() / sub / (stem("baseline", kind) + ".csv"));
      auto breport = eval::build_report(scored_set(eval_tracks, base.scores), dname, "baseline",
                                        base.detector.threshold(), config.eval.histogram_bins);
      write_report_files(run.report() / sub, stem("baseline", kind), breport);
      say(progress, tag + dname + " AUROC " + fmt(sr.embedding_reports.back().auroc) + " (baseline " +
                        fmt(breport.auroc) + ")");
      sr.baseline_reports.push_back(std::move(breport));
    }
    result.seeds.push_back(std::move(sr));
  }

  // Rows: baselines first, then the embedding detectors.
  for (const bool baseline : {true, false}) {
    for (std::size_t d = 0; d < kinds.size(); ++d) {
      TableRow row;
      row.name = (baseline ? "baseline-" : "") + std::string(detect::detector_name(kinds[d]));
      for (const auto& sr : result.seeds) {
        const auto& rep = baseline ? sr.baseline_reports[d] : sr.embedding_reports[d];
        for (const auto& [metric, value] : table_values(rep)) row.values[metric].push_back(value);
      }
      result.table.push_back(std::move(row));
    }
  }

  write_text(run.report() / "reproduce.json", json(to_json(result)).dump(2) + "\n");
  write_text(run.report() / "table.md", format_table(result));
  std::ostringstream csv;
  csv << "method";
  for (const auto& m : table_metrics()) csv << ',' << m << "_mean," << m << "_std";
  csv << '\n';
  for (const auto& row : result.table) {
    csv << row.name;
    for (const auto& m : table_metrics()) {
      csv << ',' << fmt(mean_of(row.values.at(m))) << ',' << fmt(std_of(row.values.at(m)));
    }
    csv << '\n';
  }
  write_text(run.report() / "table.csv", csv.str());

  // Severity figure data for the first seed.
  if (!result.seeds.empty()) {
    const auto ck = jepa::load_checkpoint(run.checkpoint() / "seed-0");
    const Matrix xtrain = summary_matrix(jepa::embed_all(train, ck));
    const auto options = config.detector_options(run_seed(config.seed, Stage::kDetect, 0));
    std::vector<std::pair<std::string, std::string>> hists;
    for (const auto kind : kinds) {
      const auto det = detect::FittedDetector::fit(kind, xtrain, options);
      std::vector<eval::HistogramGroup> groups;
      const auto normal = labeled_only(eval_tracks, 0);
      groups.push_back({"normal", det.score_all(summary_matrix(jepa::embed_all(normal, ck)))});
      for (std::size_t i = 0; i < severity_anomalies.size(); ++i) {
        groups.push_back({"mu=" + fmt(config.error.severity_mus[i]),
                          det.score_all(summary_matrix(jepa::embed_all(severity_anomalies[i], ck)))});
      }
      const std::string name = "severity-" + std::string(detect::detector_name(kind));
      eval::write_histogram_csv(run.report() / (name + ".csv"),
                                eval::score_histogram(groups, config.eval.histogram_bins));
      hists.emplace_back(name, name + ".csv");
    }
    std::vector<std::pair<std::string, std::string>> rocs;
    for (const auto kind : kinds) {
      for (const char* src : {"embedding", "baseline"}) {
        const std::string n = stem(src, kind);
        rocs.emplace_back(n, "seed-0/" + n + "-roc.csv");
      }
    }
    eval::write_gnuplot_script(run.report() / "plots.gnuplot", rocs, hists);
  }
  say(progress, "\n" + format_table(result));
  return result;
}

ordered_json to_json(const ReproduceResult& r) {
  ordered_json seeds = ordered_json::array();
  for (const auto& sr : r.seeds) {
    ordered_json emb = ordered_json::object(), base = ordered_json::object();
    for (const auto& rep : sr.embedding_reports) {
      ordered_json j = eval::to_json(rep);
      j.erase("roc");
      j.erase("histogram");
      emb[rep.detector] = j;
    }
    for (const auto& rep : sr.baseline_reports) {
      ordered_json j = eval::to_json(rep);
      j.erase("roc");
      j.erase("histogram");
      base[rep.detector] = j;
    }
    seeds.push_back({{"run", sr.run},
                     {"seed", sr.seed},
                     {"checkpoint", sr.checkpoint_id},
                     {"initial_loss", sr.initial_loss},
                     {"epoch_losses", sr.epoch_losses},
                     {"embedding", emb},
                     {"baseline", base},
                     {"severity_medians", sr.severity_medians},
                     {"summary_std", sr.summary_std}});
  }
  ordered_json table = ordered_json::array();
  for (const auto& row : r.table) {
    ordered_json j{{"method", row.name}};
    for (const auto& m : table_metrics()) {
      j[m] = {{"mean", mean_of(row.values.at(m))}, {"std", std_of(row.values.at(m))},
              {"values", row.values.at(m)}};
    }
    table.push_back(j);
  }
  return {{"n_train_tracks", r.n_train_tracks},
          {"n_test_tracks", r.n_test_tracks},
          {"table", table},
          {"seeds", seeds}};
}

std::string format_table(const ReproduceResult& r) {
  std::ostringstream out;
  out << "| method |";
  for (const auto& m : table_metrics()) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < table_metrics().size(); ++i) out << "---|";
  out << '\n';
  for (const auto& row : r.table) {
    out << "| " << row.name << " |";
    for (const auto& m : table_metrics()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.1f ± %.1f |", 100.0 * mean_of(row.values.at(m)),
                    100.0 * std_of(row.values.at(m)));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace jepamon::pipeline
