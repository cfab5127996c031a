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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "jepamon/object_model.hpp"

namespace jepamon {

// Newline-delimited JSON, one record per object track:
//   {"scene_id": "...", "id": "...", "t0": 0, "dt": 0.5,
//    "states": [[x, y, v, psi], ...], "label": 0|1}
// "label" is present only on labeled tracks. Doubles are written in their
// shortest round-trip representation.

void write_tracks(std::ostream& out, std::span<const ObjectTrack> tracks);
void save_object_lists(std::span<const ObjectList> lists, const std::filesystem::path& path);
void save_tracks(std::span<const ObjectTrack> tracks, const std::filesystem::path& path);

/// Reads tracks in file order. Throws ParseError with the 1-based line number
/// and offending field on malformed records.
std::vector<ObjectTrack> read_tracks(std::istream& in);
std::vector<ObjectTrack> load_tracks(const std::filesystem::path& path);

/// Groups records by scene_id in order of first appearance. Duplicate track
/// ids within one scene are rejected.
std::vector<ObjectList> load_object_lists(const std::filesystem::path& path);
std::vector<ObjectList> group_by_scene(std::vector<ObjectTrack> tracks);

}  // namespace jepamon
