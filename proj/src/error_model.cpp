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

#include "jepamon/error_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "jepamon/errors.hpp"

namespace jepamon {

using nlohmann::json;

void ErrorSpec::validate() const {
  if (!(sigma >= 0.0)) throw ConfigError("error spec: sigma must be non-negative");
  if (!std::isfinite(mu)) throw ConfigError("error spec: mu must be finite");
}

std::pair<ObjectTrack, InjectionRecord> inject(const ObjectTrack& track, const ErrorSpec& spec,
                                               Rng& rng) {
  spec.validate();
  if (track.states.empty()) throw Error("inject: empty track '" + track.id + "'");
  InjectionRecord rec;
  rec.scene_id = track.scene_id;
  rec.track_id = track.id;
  rec.feature = spec.feature;
  rec.theta = spec.mu + spec.sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
  rec.step = std::uniform_int_distribution<int>(0, track.length() - 1)(rng);

  ObjectTrack out = track;
  double& cell = out.states[rec.step][spec.feature];
  cell += rec.theta;
  if (spec.feature == Feature::kPsi) {
    cell = wrap_angle(cell);
  } else if (spec.feature == Feature::kV && cell < 0.0) {
    cell = 0.0;
    rec.clamped = true;
  }
  return {std::move(out), rec};
}

EvalSet build_eval_set(std::span<const ObjectTrack> test_tracks, const ErrorSpec& spec,
                       std::uint64_t seed, bool paired) {
  spec.validate();
  if (test_tracks.size() < 2) throw Error("build_eval_set: need at least 2 test tracks");
  Rng label_rng = make_rng(seed, {0x1abe1});
  Rng inject_rng = make_rng(seed, {0x1e7ec7});

  EvalSet set;
  const std::size_t n = test_tracks.size();
  if (paired) {
    for (std::size_t i = 0; i < n; ++i) {
      ObjectTrack normal = test_tracks[i];
      normal.label = 0;
      auto [bad, rec] = inject(test_tracks[i], spec, inject_rng);
      bad.label = 1;
      set.data.test.push_back(std::move(normal));
      set.data.test.push_back(std::move(bad));
      set.records.push_back(rec);
      set.source.push_back(i);
      set.source.push_back(i);
    }
    return set;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), label_rng);
  std::vector<char> anomalous(n, 0);
  for (std::size_t k = 0; k < n / 2; ++k) anomalous[order[k]] = 1;

  for (std::size_t i = 0; i < n; ++i) {
    if (anomalous[i]) {
      auto [bad, rec] = inject(test_tracks[i], spec, inject_rng);
      bad.label = 1;
      set.data.test.push_back(std::move(bad));
      set.records.push_back(rec);
    } else {
      ObjectTrack normal = test_tracks[i];
      normal.label = 0;
      set.data.test.push_back(std::move(normal));
    }
    set.source.push_back(i);
  }
  return set;
}

void save_injection_records(std::span<const InjectionRecord> records,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const InjectionRecord& r : records) {
    json j = {{"scene_id", r.scene_id}, {"id", r.track_id},
              {"feature", std::string(feature_name(r.feature))},
              {"t", r.step}, {"theta", r.theta}, {"clamped", r.clamped}};
    out << j.dump() << '\n';
  }
}

std::vector<InjectionRecord> load_injection_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<InjectionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      InjectionRecord r;
      r.scene_id = j.at("scene_id").get<std::string>();
      r.track_id = j.at("id").get<std::string>();
      r.feature = parse_feature(j.at("feature").get<std::string>());
      r.step = j.at("t").get<int>();
      r.theta = j.at("theta").get<double>();
      r.clamped = j.at("clamped").get<bool>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return records;
}

}  // namespace jepamon
