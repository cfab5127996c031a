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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "jepamon/object_model.hpp"

namespace jepamon {

/// Synthetic object-list generator settings. Every track follows either a
/// constant-velocity or a constant-turn-rate model; the remaining probability
/// mass produces stationary objects (v = 0).
struct SceneConfig {
  int duration_steps = 40;  // 20 s at 2 Hz
  int min_objects = 4;
  int max_objects = 12;
  double p_constant_velocity = 0.6;
  double p_constant_turn = 0.3;
  double speed_min = 0.0;
  double speed_max = 15.0;
  double turn_rate_min = -0.3;  // rad/s
  double turn_rate_max = 0.3;
  double area_half_extent = 60.0;  // initial positions uniform in [-a, a]^2 around EGO
  std::array<double, kNumFeatures> noise_std{0.2, 0.2, 0.2, 0.02};  // x, y, v, psi
  double truncation_prob = 0.02;  // per-step probability that a track ends
  std::uint64_t seed = 0;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  double mean_objects() const { return 0.5 * (min_objects + max_objects); }
};

void to_json(nlohmann::json& j, const SceneConfig& c);
/// Unknown keys are rejected.
void from_json(const nlohmann::json& j, SceneConfig& c);

enum class MotionModel { kStationary, kConstantVelocity, kConstantTurn };

/// Ground-truth parameters of one generated track, enough to recompute the
/// noiseless rollout in closed form.
struct TrackTruth {
  std::string id;
  MotionModel model = MotionModel::kStationary;
  double x0 = 0, y0 = 0, psi0 = 0;  // state at scene step 0
  double speed = 0;
  double turn_rate = 0;
  std::int64_t start = 0;  // first observed step
  int length = 0;
};

struct GeneratedScene {
  ObjectList list;
  std::vector<TrackTruth> truth;  // parallel to list.tracks
};

/// Generates one scene from config.seed. Tracks shorter than the minimum
/// length are dropped; the result may be empty for unlucky draws, but a config
/// that cannot produce any valid track is rejected.
GeneratedScene generate_scene_with_truth(const SceneConfig& config, const std::string& scene_id);
ObjectList generate_scene(const SceneConfig& config, const std::string& scene_id);

/// Scene seeds are derived from `seed` per split and scene index, so splits
/// never share a generator stream. Throws if a split ends up without tracks.
LabeledDataset generate_dataset(const SceneConfig& config, int n_train_scenes, int n_test_scenes,
                                std::uint64_t seed);

}  // namespace jepamon
