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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jepamon/matrix.hpp"

namespace jepamon {

/// Minimum number of timesteps of a usable object track.
inline constexpr int kMinTrackLength = 8;
/// Number of per-timestep object features (x, y, v, psi).
inline constexpr int kNumFeatures = 4;
/// Sampling interval of the object list (2 Hz).
inline constexpr double kSampleInterval = 0.5;

/// Feature columns of a FeatureMatrix, in fixed order.
enum class Feature : int { kX = 0, kY = 1, kV = 2, kPsi = 3 };

std::string_view feature_name(Feature f);
/// Parses "x", "y", "v" or "psi". Throws ConfigError otherwise.
Feature parse_feature(std::string_view name);

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

struct ObjectState {
  double x = 0.0;    // longitudinal position [m]
  double y = 0.0;    // lateral position [m]
  double v = 0.0;    // speed [m/s], >= 0
  double psi = 0.0;  // orientation [rad], in [-pi, pi)

  double operator[](Feature f) const;
  double& operator[](Feature f);
  bool operator==(const ObjectState&) const = default;
};

/// One traffic participant observed at consecutive timesteps t0, t0+1, ...
struct ObjectTrack {
  std::string scene_id;
  std::string id;
  std::int64_t t0 = 0;
  double dt = kSampleInterval;
  std::vector<ObjectState> states;
  /// Anomaly tag; only set on evaluation tracks. 1 = anomalous.
  std::optional<int> label;

  int length() const { return static_cast<int>(states.size()); }
  bool operator==(const ObjectTrack&) const = default;
};

/// Checks the ObjectTrack invariants (length, v >= 0, psi range, finite
/// values). Throws Error naming the first violation.
void validate_track(const ObjectTrack& track);

struct ObjectList {
  std::string scene_id;
  std::vector<ObjectTrack> tracks;

  bool operator==(const ObjectList&) const = default;
};

/// T x 4 matrix with columns (x, y, v, psi); an optional fifth column holds
/// the mask bit.
using FeatureMatrix = Matrix;

/// Per-feature affine normalization fitted on the train split.
struct NormStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> std{};

  bool operator==(const NormStats&) const = default;
};

struct LabeledDataset {
  std::vector<ObjectTrack> train;
  /// Every test track carries a label once the evaluation set is built.
  std::vector<ObjectTrack> test;
};

FeatureMatrix to_feature_matrix(const ObjectTrack& track);

/// Inverse of to_feature_matrix given the identifying fields.
ObjectTrack from_feature_matrix(const FeatureMatrix& features, std::string scene_id,
                                std::string id, std::int64_t t0 = 0);

/// Population mean/std over every timestep of every track. Throws on an empty
/// set or a zero-variance feature.
NormStats fit_stats(std::span<const ObjectTrack> train_tracks);

/// (x - mean) / std on the first four columns; any further column is copied.
FeatureMatrix standardize(const FeatureMatrix& features, const NormStats& stats);
FeatureMatrix destandardize(const FeatureMatrix& features, const NormStats& stats);

/// Collects every track of every list.
std::vector<ObjectTrack> flatten(std::span<const ObjectList> lists);

}  // namespace jepamon
