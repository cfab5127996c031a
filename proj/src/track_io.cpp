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

#include "jepamon/track_io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jepamon/errors.hpp"

namespace jepamon {

using nlohmann::json;

namespace {

json track_to_json(const ObjectTrack& t) {
  json states = json::array();
  for (const ObjectState& s : t.states) states.push_back({s.x, s.y, s.v, s.psi});
  json j = {{"scene_id", t.scene_id}, {"id", t.id}, {"t0", t.t0}, {"dt", t.dt},
            {"states", std::move(states)}};
  if (t.label) j["label"] = *t.label;
  return j;
}

const json& require(const json& j, const char* field, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end()) throw ParseError(std::string("missing field \"") + field + "\"", line);
  return *it;
}

ObjectTrack track_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  ObjectTrack t;
  const json& scene = require(j, "scene_id", line);
  const json& id = require(j, "id", line);
  if (!scene.is_string()) throw ParseError("field \"scene_id\" must be a string", line);
  if (!id.is_string()) throw ParseError("field \"id\" must be a string", line);
  t.scene_id = scene.get<std::string>();
  t.id = id.get<std::string>();
  const json& t0 = require(j, "t0", line);
  if (!t0.is_number_integer()) throw ParseError("field \"t0\" must be an integer", line);
  t.t0 = t0.get<std::int64_t>();
  const json& dt = require(j, "dt", line);
  if (!dt.is_number()) throw ParseError("field \"dt\" must be a number", line);
  t.dt = dt.get<double>();
  const json& states = require(j, "states", line);
  if (!states.is_array()) throw ParseError("field \"states\" must be an array", line);
  static constexpr const char* kNames[] = {"x", "y", "v", "psi"};
  t.states.reserve(states.size());
  for (std::size_t r = 0; r < states.size(); ++r) {
    const json& row = states[r];
    if (!row.is_array()) {
      throw ParseError("states[" + std::to_string(r) + "] must be an array [x, y, v, psi]", line);
    }
    ObjectState s;
    for (int f = 0; f < kNumFeatures; ++f) {
      if (static_cast<int>(row.size()) <= f) {
        throw ParseError("states[" + std::to_string(r) + "]: missing field \"" + kNames[f] + "\"",
                         line);
      }
      if (!row[f].is_number()) {
        throw ParseError("states[" + std::to_string(r) + "]: field \"" + kNames[f] +
                             "\" must be a number",
                         line);
      }
      s[static_cast<Feature>(f)] = row[f].get<double>();
    }
    if (row.size() > static_cast<std::size_t>(kNumFeatures)) {
      throw ParseError("states[" + std::to_string(r) + "] has more than 4 values", line);
    }
    t.states.push_back(s);
  }
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1)) {
      throw ParseError("field \"label\" must be 0 or 1", line);
    }
    t.label = it->get<int>();
  }
  return t;
}

}  // namespace

void write_tracks(std::ostream& out, std::span<const ObjectTrack> tracks) {
  for (const ObjectTrack& t : tracks) out << track_to_json(t).dump() << '\n';
}

void save_tracks(std::span<const ObjectTrack> tracks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_tracks(out, tracks);
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

void save_object_lists(std::span<const ObjectList> lists, const std::filesystem::path& path) {
  save_tracks(flatten(lists), path);
}

std::vector<ObjectTrack> read_tracks(std::istream& in) {
  std::vector<ObjectTrack> tracks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    tracks.push_back(track_from_json(j, line_no));
  }
  return tracks;
}

std::vector<ObjectTrack> load_tracks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_tracks(in);
}

std::vector<ObjectList> group_by_scene(std::vector<ObjectTrack> tracks) {
  std::vector<ObjectList> lists;
  std::map<std::string, std::size_t> index;
  std::set<std::pair<std::string, std::string>> seen;
  for (ObjectTrack& t : tracks) {
    if (!seen.emplace(t.scene_id, t.id).second) {
      throw Error("duplicate track id '" + t.id + "' in scene '" + t.scene_id + "'");
    }
    auto [it, inserted] = index.emplace(t.scene_id, lists.size());
    if (inserted) lists.push_back(ObjectList{t.scene_id, {}});
    lists[it->second].tracks.push_back(std::move(t));
  }
  return lists;
}

std::vector<ObjectList> load_object_lists(const std::filesystem::path& path) {
  return group_by_scene(load_tracks(path));
}

}  // namespace jepamon
