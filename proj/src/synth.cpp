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

#include "jepamon/synth.hpp"

#include <cmath>
#include <numbers>

#include "jepamon/errors.hpp"
#include "jepamon/rng.hpp"

namespace jepamon {

using nlohmann::json;

void SceneConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("scene config: " + msg); };
  if (duration_steps < kMinTrackLength) fail("duration_steps must be >= 8");
  if (min_objects < 0 || max_objects < min_objects) fail("need 0 <= min_objects <= max_objects");
  if (max_objects == 0) fail("max_objects must be positive");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_constant_velocity) || !prob(p_constant_turn) ||
      p_constant_velocity + p_constant_turn > 1.0) {
    fail("motion-model probabilities must lie in [0, 1] and sum to at most 1");
  }
  if (!prob(truncation_prob)) fail("truncation_prob must lie in [0, 1]");
  if (truncation_prob >= 1.0) fail("truncation_prob = 1 yields no valid tracks");
  if (speed_min < 0.0 || speed_max < speed_min) fail("need 0 <= speed_min <= speed_max");
  if (turn_rate_max < turn_rate_min) fail("turn_rate_max < turn_rate_min");
  if (area_half_extent < 0.0) fail("area_half_extent must be non-negative");
  for (double s : noise_std) {
    if (!(s >= 0.0)) fail("noise stds must be non-negative");
  }
}

void to_json(json& j, const SceneConfig& c) {
  j = json{{"duration_steps", c.duration_steps},
           {"min_objects", c.min_objects},
           {"max_objects", c.max_objects},
           {"p_constant_velocity", c.p_constant_velocity},
           {"p_constant_turn", c.p_constant_turn},
           {"speed_min", c.speed_min},
           {"speed_max", c.speed_max},
           {"turn_rate_min", c.turn_rate_min},
           {"turn_rate_max", c.turn_rate_max},
           {"area_half_extent", c.area_half_extent},
           {"noise_std", c.noise_std},
           {"truncation_prob", c.truncation_prob},
           {"seed", c.seed}};
}

void from_json(const json& j, SceneConfig& c) {
  json defaults;
  to_json(defaults, SceneConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("scene config: unknown key '" + key + "'");
  }
  try {
    c.duration_steps = j.value("duration_steps", c.duration_steps);
    c.min_objects = j.value("min_objects", c.min_objects);
    c.max_objects = j.value("max_objects", c.max_objects);
    c.p_constant_velocity = j.value("p_constant_velocity", c.p_constant_velocity);
    c.p_constant_turn = j.value("p_constant_turn", c.p_constant_turn);
    c.speed_min = j.value("speed_min", c.speed_min);
    c.speed_max = j.value("speed_max", c.speed_max);
    c.turn_rate_min = j.value("turn_rate_min", c.turn_rate_min);
    c.turn_rate_max = j.value("turn_rate_max", c.turn_rate_max);
    c.area_half_extent = j.value("area_half_extent", c.area_half_extent);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.truncation_prob = j.value("truncation_prob", c.truncation_prob);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
}

GeneratedScene generate_scene_with_truth(const SceneConfig& config, const std::string& scene_id) {
  config.validate();
  Rng rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  GeneratedScene scene;
  scene.list.scene_id = scene_id;
  const int n_objects =
      std::uniform_int_distribution<int>(config.min_objects, config.max_objects)(rng);
  const int last_start = config.duration_steps - kMinTrackLength;

  for (int k = 0; k < n_objects; ++k) {
    TrackTruth truth;
    truth.id = "o" + std::to_string(k);
    const double u = unit(rng);
    if (u < config.p_constant_velocity) {
      truth.model = MotionModel::kConstantVelocity;
    } else if (u < config.p_constant_velocity + config.p_constant_turn) {
      truth.model = MotionModel::kConstantTurn;
    }
    truth.x0 = uniform(-config.area_half_extent, config.area_half_extent);
    truth.y0 = uniform(-config.area_half_extent, config.area_half_extent);
    truth.psi0 = wrap_angle(uniform(-std::numbers::pi, std::numbers::pi));
    const double speed = uniform(config.speed_min, config.speed_max);
    const double turn = uniform(config.turn_rate_min, config.turn_rate_max);
    truth.speed = truth.model == MotionModel::kStationary ? 0.0 : speed;
    truth.turn_rate = truth.model == MotionModel::kConstantTurn ? turn : 0.0;

    truth.start = std::uniform_int_distribution<int>(0, last_start)(rng);
    int length = 1;
    while (truth.start + length < config.duration_steps && unit(rng) >= config.truncation_prob) {
      ++length;
    }
    truth.length = length;

    // Roll the state forward step by step from scene start; record the visible window.
    ObjectTrack track;
    track.scene_id = scene_id;
    track.id = truth.id;
    track.t0 = truth.start;
    track.dt = kSampleInterval;
    double x = truth.x0, y = truth.y0, psi = truth.psi0;
    const double v = truth.speed, omega = truth.turn_rate, dt = kSampleInterval;
    for (std::int64_t step = 0; step < truth.start + length; ++step) {
      if (step >= truth.start) {
        // Noise is drawn for every feature regardless of its std so the stream
        // layout does not depend on the noise settings.
        ObjectState s;
        s.x = x + config.noise_std[0] * gauss(rng);
        s.y = y + config.noise_std[1] * gauss(rng);
        s.v = std::max(0.0, v + config.noise_std[2] * gauss(rng));
        s.psi = wrap_angle(psi + config.noise_std[3] * gauss(rng));
        track.states.push_back(s);
      }
      if (std::abs(omega) > 1e-12) {
        const double psi_next = psi + omega * dt;
        x += v / omega * (std::sin(psi_next) - std::sin(psi));
        y -= v / omega * (std::cos(psi_next) - std::cos(psi));
        psi = psi_next;
      } else {
        x += v * std::cos(psi) * dt;
        y += v * std::sin(psi) * dt;
      }
    }
    if (track.length() >= kMinTrackLength) {
      scene.list.tracks.push_back(std::move(track));
      scene.truth.push_back(truth);
    }
  }
  return scene;
}

ObjectList generate_scene(const SceneConfig& config, const std::string& scene_id) {
  return generate_scene_with_truth(config, scene_id).list;
}

namespace {

std::string scene_name(const char* split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06d", split, index);
  return buf;
}

}  // namespace

LabeledDataset generate_dataset(const SceneConfig& config, int n_train_scenes, int n_test_scenes,
                                std::uint64_t seed) {
  if (n_train_scenes < 1 || n_test_scenes < 1) {
    throw ConfigError("generate_dataset: scene counts must be >= 1");
  }
  LabeledDataset data;
  auto run_split = [&](const char* split, std::uint64_t split_id, int n,
                       std::vector<ObjectTrack>& out) {
    for (int i = 0; i < n; ++i) {
      SceneConfig c = config;
      c.seed = derive_seed(seed, {split_id, static_cast<std::uint64_t>(i)});
      ObjectList list = generate_scene(c, scene_name(split, i));
      for (ObjectTrack& t : list.tracks) out.push_back(std::move(t));
    }
    if (out.empty()) throw Error(std::string("generate_dataset: ") + split + " split has no tracks");
  };
  run_split("train", 1, n_train_scenes, data.train);
  run_split("test", 2, n_test_scenes, data.test);
  return data;
}

}  // namespace jepamon
