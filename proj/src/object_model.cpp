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

#include "jepamon/object_model.hpp"

#include <cmath>
#include <numbers>

#include "jepamon/errors.hpp"

namespace jepamon {

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::kX:
      return "x";
    case Feature::kY:
      return "y";
    case Feature::kV:
      return "v";
    case Feature::kPsi:
      return "psi";
  }
  return "?";
}

Feature parse_feature(std::string_view name) {
  if (name == "x") return Feature::kX;
  if (name == "y") return Feature::kY;
  if (name == "v") return Feature::kV;
  if (name == "psi") return Feature::kPsi;
  throw ConfigError("unknown feature '" + std::string(name) + "' (expected x, y, v or psi)");
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  w -= std::numbers::pi;
  // fmod rounding can land exactly on +pi.
  if (w >= std::numbers::pi) w -= kTwoPi;
  return w;
}

double ObjectState::operator[](Feature f) const {
  switch (f) {
    case Feature::kX:
      return x;
    case Feature::kY:
      return y;
    case Feature::kV:
      return v;
    case Feature::kPsi:
      return psi;
  }
  return 0.0;
}

double& ObjectState::operator[](Feature f) {
  switch (f) {
    case Feature::kX:
      return x;
    case Feature::kY:
      return y;
    case Feature::kV:
      return v;
    case Feature::kPsi:
    default:
      return psi;
  }
}

void validate_track(const ObjectTrack& track) {
  const std::string who = "track '" + track.id + "' (scene '" + track.scene_id + "')";
  if (track.length() < kMinTrackLength) {
    throw Error(who + ": track too short (" + std::to_string(track.length()) + " < " +
                std::to_string(kMinTrackLength) + " timesteps)");
  }
  if (track.t0 < 0) throw Error(who + ": negative start timestep");
  for (std::size_t i = 0; i < track.states.size(); ++i) {
    const ObjectState& s = track.states[i];
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.v) ||
        !std::isfinite(s.psi)) {
      throw Error(who + ": non-finite state at index " + std::to_string(i));
    }
    if (s.v < 0.0) throw Error(who + ": negative speed at index " + std::to_string(i));
    if (s.psi < -std::numbers::pi || s.psi >= std::numbers::pi) {
      throw Error(who + ": orientation outside [-pi, pi) at index " + std::to_string(i));
    }
  }
}

FeatureMatrix to_feature_matrix(const ObjectTrack& track) {
  if (track.length() < kMinTrackLength) {
    throw Error("track too short: '" + track.id + "' has " + std::to_string(track.length()) +
                " timesteps, minimum is " + std::to_string(kMinTrackLength));
  }
  FeatureMatrix m(track.length(), kNumFeatures);
  for (int r = 0; r < track.length(); ++r) {
    const ObjectState& s = track.states[r];
    m(r, 0) = s.x;
    m(r, 1) = s.y;
    m(r, 2) = s.v;
    m(r, 3) = s.psi;
  }
  return m;
}

ObjectTrack from_feature_matrix(const FeatureMatrix& features, std::string scene_id,
                                std::string id, std::int64_t t0) {
  if (features.cols() < kNumFeatures) throw Error("feature matrix has fewer than 4 columns");
  ObjectTrack track;
  track.scene_id = std::move(scene_id);
  track.id = std::move(id);
  track.t0 = t0;
  track.states.resize(features.rows());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    track.states[r] = {features(r, 0), features(r, 1), features(r, 2), features(r, 3)};
  }
  return track;
}

NormStats fit_stats(std::span<const ObjectTrack> train_tracks) {
  if (train_tracks.empty()) throw Error("fit_stats: empty train set");
  // Two-pass moments for accuracy.
  std::array<double, kNumFeatures> sum{};
  std::size_t n = 0;
  for (const ObjectTrack& t : train_tracks) {
    for (const ObjectState& s : t.states) {
      for (int f = 0; f < kNumFeatures; ++f) sum[f] += s[static_cast<Feature>(f)];
    }
    n += t.states.size();
  }
  if (n == 0) throw Error("fit_stats: train set has no timesteps");
  NormStats stats;
  for (int f = 0; f < kNumFeatures; ++f) stats.mean[f] = sum[f] / static_cast<double>(n);
  std::array<double, kNumFeatures> sq{};
  for (const ObjectTrack& t : train_tracks) {
    for (const ObjectState& s : t.states) {
      for (int f = 0; f < kNumFeatures; ++f) {
        const double d = s[static_cast<Feature>(f)] - stats.mean[f];
        sq[f] += d * d;
      }
    }
  }
  for (int f = 0; f < kNumFeatures; ++f) {
    stats.std[f] = std::sqrt(sq[f] / static_cast<double>(n));
    if (!(stats.std[f] > 0.0)) {
      throw Error("fit_stats: feature '" +
                  std::string(feature_name(static_cast<Feature>(f))) + "' has zero variance");
    }
  }
  return stats;
}

namespace {

void check_columns(const FeatureMatrix& features) {
  if (features.cols() < kNumFeatures) {
    throw Error("shape mismatch: expected at least 4 feature columns, got " +
                std::to_string(features.cols()));
  }
}

}  // namespace

FeatureMatrix standardize(const FeatureMatrix& features, const NormStats& stats) {
  check_columns(features);
  FeatureMatrix out = features;
  for (int f = 0; f < kNumFeatures; ++f) {
    out.col(f) = (features.col(f).array() - stats.mean[f]) / stats.std[f];
  }
  return out;
}

FeatureMatrix destandardize(const FeatureMatrix& features, const NormStats& stats) {
  check_columns(features);
  FeatureMatrix out = features;
  for (int f = 0; f < kNumFeatures; ++f) {
    out.col(f) = features.col(f).array() * stats.std[f] + stats.mean[f];
  }
  return out;
}

std::vector<ObjectTrack> flatten(std::span<const ObjectList> lists) {
  std::vector<ObjectTrack> out;
  for (const ObjectList& l : lists) out.insert(out.end(), l.tracks.begin(), l.tracks.end());
  return out;
}

}  // namespace jepamon
