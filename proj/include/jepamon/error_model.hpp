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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jepamon/object_model.hpp"
#include "jepamon/rng.hpp"

namespace jepamon {

/// Sporadic single-feature error: theta ~ N(mu, sigma^2) added to one feature
/// at one timestep of a track.
struct ErrorSpec {
  Feature feature = Feature::kV;
  double mu = 5.0;
  double sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct InjectionRecord {
  std::string scene_id;
  std::string track_id;
  Feature feature = Feature::kV;
  int step = 0;         // index into the track's states
  double theta = 0.0;   // drawn error
  bool clamped = false; // speed hit the zero floor

  bool operator==(const InjectionRecord&) const = default;
};

/// Returns a corrupted copy of `track`. One theta per call, one uniformly
/// chosen timestep. psi is re-wrapped, v clamped at zero.
std::pair<ObjectTrack, InjectionRecord> inject(const ObjectTrack& track, const ErrorSpec& spec,
                                               Rng& rng);

struct EvalSet {
  LabeledDataset data;                  // train copied unchanged, test labeled
  std::vector<InjectionRecord> records; // one per label-1 track
  /// Index of the source test track for every output test track.
  std::vector<std::size_t> source;
};

/// Labels a random half of the test tracks as anomalous (exact balance up to
/// one element when the count is odd) and corrupts those. In paired mode
/// every track appears twice: unchanged with label 0 and corrupted with
/// label 1.
EvalSet build_eval_set(std::span<const ObjectTrack> test_tracks, const ErrorSpec& spec,
                       std::uint64_t seed, bool paired = false);

void save_injection_records(std::span<const InjectionRecord> records,
                            const std::filesystem::path& path);
std::vector<InjectionRecord> load_injection_records(const std::filesystem::path& path);

}  // namespace jepamon
