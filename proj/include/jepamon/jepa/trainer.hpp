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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jepamon/jepa/masking.hpp"
#include "jepamon/jepa/model.hpp"
#include "jepamon/nn/optim.hpp"
#include "jepamon/object_model.hpp"

namespace jepamon::jepa {

struct TrainConfig {
  int epochs = 250;
  double learning_rate = 3e-5;
  double ema_decay = 0.99;
  int batch_size = 64;
  int n_masked = 4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Context encoder, predictor and the EMA target encoder.
class JepaModel {
 public:
  JepaModel() = default;
  /// The target encoder starts as a copy of the context encoder.
  JepaModel(const EncoderConfig& encoder, const PredictorConfig& predictor, std::uint64_t seed);

  /// Context encoder followed by predictor parameters (the ADAM-updated set).
  nn::ParameterSet trainable();
  nn::ParameterSet context_parameters() { return context.parameters(); }
  nn::ParameterSet target_parameters() { return target.parameters(); }

  /// target <- decay * target + (1 - decay) * context, per parameter.
  void update_ema(double decay);

  ObjectEncoder context;
  Predictor predictor;
  ObjectEncoder target;
};

/// Masked-latent prediction loss of a batch: L1 between predictor output and
/// the target encoder's tokens at the masked indices, averaged over
/// batch x masked x embedding dims. With `backward` set, the trainable
/// gradients are zeroed and then filled; the target branch never touches a
/// gradient buffer.
double jepa_loss(JepaModel& model, std::span<const MaskedSample> batch, bool backward);

/// One optimizer step on `batch` (standardized T x 4 matrices): mask, loss,
/// backward, ADAM, EMA. Returns the pre-update loss. Throws on a non-finite loss.
double training_step(JepaModel& model, nn::AdamState& adam, std::span<const FeatureMatrix> batch,
                     const TrainConfig& config, Rng& rng);

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  int schema_version = kCheckpointSchemaVersion;
  EncoderConfig encoder;
  PredictorConfig predictor;
  TrainConfig train;
  NormStats stats;
  JepaModel model;
  nn::AdamState adam;
  int epochs_done = 0;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;

  int embed_dim() const { return encoder.embed_dim; }
  /// Content hash of all parameter and optimizer values (hex).
  std::string id() const;
};

/// Fits normalization statistics on `train_tracks` and initializes the model.
Checkpoint init_checkpoint(std::span<const ObjectTrack> train_tracks, const TrainConfig& train,
                           const EncoderConfig& encoder = {}, const PredictorConfig& predictor = {});

/// Runs epochs `epochs_done .. train.epochs - 1`. Each epoch draws its
/// shuffle and masks from a generator derived from (seed, epoch), so a run
/// resumed from a saved checkpoint continues bit-identically.
void train(Checkpoint& checkpoint, std::span<const ObjectTrack> train_tracks,
           const std::function<void(int epoch, double loss)>& on_epoch = {});

/// Mean loss over `tracks` without updating anything; masks from `seed`.
double evaluate_loss(Checkpoint& checkpoint, std::span<const ObjectTrack> tracks,
                     std::uint64_t seed);

/// Directory layout: model.bin (tensor archive) + checkpoint.json (configs,
/// normalization, optimizer step, loss history, id).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct Embedding {
  std::string scene_id;
  std::string track_id;
  std::string checkpoint_id;
  std::optional<int> label;
  Matrix tokens;  // T x D
};

/// Standardizes, appends an all-zero mask bit and runs the context encoder.
Embedding embed(const ObjectTrack& track, const Checkpoint& checkpoint);
std::vector<Embedding> embed_all(std::span<const ObjectTrack> tracks, const Checkpoint& checkpoint,
                                 int batch_size = 64);

}  // namespace jepamon::jepa
