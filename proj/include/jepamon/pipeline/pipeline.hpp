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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jepamon/detect/detectors.hpp"
#include "jepamon/error_model.hpp"
#include "jepamon/eval/metrics.hpp"
#include "jepamon/jepa/trainer.hpp"
#include "jepamon/synth.hpp"

namespace jepamon::pipeline {

struct SimulatorSection {
  SceneConfig scene;
  int n_train_scenes = 320;
  int n_test_scenes = 100;
};

struct ErrorSection {
  std::string feature = "v";
  double mu = 5.0;
  double sigma = 0.1;
  bool paired = false;
  /// Means of the extra eval sets scored for the severity figure.
  std::vector<double> severity_mus{2.5, 5.0, 7.5};
};

struct TrainSection {
  jepa::TrainConfig train;
  jepa::EncoderConfig encoder;
  jepa::PredictorConfig predictor;
};

struct DetectorSection {
  std::vector<std::string> kinds{"abod", "lof", "gmm"};
  std::size_t abod_max_reference = 500;
  int lof_neighbors = 15;
  int gmm_components = 5;
  double threshold_quantile = 0.99;
  int baseline_length = 40;
};

struct EvalSection {
  int histogram_bins = 40;
  int n_seeds = 5;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  SimulatorSection simulator;
  ErrorSection error;
  TrainSection train;
  DetectorSection detector;
  EvalSection eval;

  void validate() const;
  std::vector<detect::DetectorKind> detector_kinds() const;
  detect::DetectorOptions detector_options(std::uint64_t seed) const;
  ErrorSpec error_spec(double mu, std::uint64_t seed) const;
};

nlohmann::ordered_json to_json(const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a config document. The value is parsed as JSON
/// when possible and taken as a string otherwise. The key must exist.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Sub-seed streams. Stage seeds are derive_seed(global, {stage}) and per-run
// seeds derive_seed(global, {stage, run}).
enum class Stage : std::uint64_t {
  kSimulate = 1,
  kInject = 2,
  kTrain = 3,
  kDetect = 4,
  kSeverity = 5,
};
std::uint64_t stage_seed(std::uint64_t global, Stage stage);
std::uint64_t run_seed(std::uint64_t global, Stage stage, int run);

/// Paths inside a run directory.
struct RunDir {
  std::filesystem::path root;

  std::filesystem::path snapshot() const { return root / "config.snapshot"; }
  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path train_tracks() const { return dataset() / "train.ndjson"; }
  std::filesystem::path test_tracks() const { return dataset() / "test.ndjson"; }
  std::filesystem::path eval_tracks() const { return dataset() / "eval.ndjson"; }
  std::filesystem::path injections() const { return dataset() / "injections.ndjson"; }
  std::filesystem::path checkpoint() const { return root / "checkpoint"; }
  std::filesystem::path embeddings() const { return root / "embeddings"; }
  std::filesystem::path scores() const { return root / "scores"; }
  std::filesystem::path report() const { return root / "report"; }
};

/// Resolves the run directory: `explicit_dir` if given, else
/// $JEPAMON_RUN_ROOT (default "runs") / "seed-<seed>".
RunDir resolve_run_dir(const std::optional<std::filesystem::path>& explicit_dir,
                       std::uint64_t seed);

/// Writes config.snapshot, or checks that an existing snapshot is identical.
void write_snapshot(const RunDir& run, const PipelineConfig& config);

// ----------------------------------------------------------- Embeddings

/// NDJSON, one record per track:
///   {"scene_id", "id", "checkpoint", "dim", "label"?, "tokens": [[...], ...]}
void save_embeddings(std::span<const jepa::Embedding> embeddings, const std::filesystem::path& path);
std::vector<jepa::Embedding> load_embeddings(const std::filesystem::path& path);

/// Max-pooled summary vectors stacked into a matrix.
Matrix summary_matrix(std::span<const jepa::Embedding> embeddings);

// --------------------------------------------------------------- Scores

struct ScoreRow {
  std::string track_id;  // "<scene_id>/<id>"
  std::optional<int> label;
  std::string detector;
  double score = 0.0;
  int prediction = 0;
};

/// CSV with header track_id,label,detector,score,prediction.
void save_scores(std::span<const ScoreRow> rows, const std::filesystem::path& path);
std::vector<ScoreRow> load_scores(const std::filesystem::path& path);

std::string track_key(const ObjectTrack& track);

// ------------------------------------------------------------- Commands

using Progress = std::function<void(std::string_view)>;

void cmd_simulate(const PipelineConfig& config, const RunDir& run, const Progress& progress = {});
void cmd_inject(const PipelineConfig& config, const RunDir& run, const Progress& progress = {});
void cmd_train(const PipelineConfig& config, const RunDir& run, const Progress& progress = {});
void cmd_embed(const PipelineConfig& config, const RunDir& run, const Progress& progress = {});

enum class DetectInput { kEmbeddings, kRaw };
void cmd_detect(const PipelineConfig& config, const RunDir& run, DetectInput input,
                const Progress& progress = {});
void cmd_evaluate(const PipelineConfig& config, const RunDir& run, const Progress& progress = {});

/// Per-detector aggregate over seeds.
struct TableRow {
  std::string name;  // "ABOD" or "baseline-ABOD"
  std::map<std::string, std::vector<double>> values;  // metric -> one value per seed
};

struct SeedResult {
  int run = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
  std::vector<double> epoch_losses;
  double initial_loss = 0.0;
  std::vector<eval::EvalReport> embedding_reports;
  std::vector<eval::EvalReport> baseline_reports;
  /// detector name -> median test score of the anomalous tracks per severity mu.
  std::map<std::string, std::vector<double>> severity_medians;
  /// Std over train tracks of every max-pooled embedding dimension.
  std::vector<double> summary_std;
};

struct ReproduceResult {
  std::size_t n_train_tracks = 0;
  std::size_t n_test_tracks = 0;
  std::vector<SeedResult> seeds;
  std::vector<TableRow> table;
};

inline const std::vector<std::string>& table_metrics() {
  static const std::vector<std::string> m{"AUROC", "F1", "MCC", "Acc", "FPR95", "TPR5", "TPR1"};
  return m;
}

/// simulate -> inject -> for each seed: train, embed, detect (embedding and
/// baseline), severity sweep -> mean +- std table. Writes report/reproduce.json,
/// report/table.csv, report/table.md and per-seed reports.
ReproduceResult cmd_reproduce(const PipelineConfig& config, const RunDir& run,
                              const Progress& progress = {});

nlohmann::ordered_json to_json(const ReproduceResult& r);
std::string format_table(const ReproduceResult& r);

}  // namespace jepamon::pipeline
