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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "jepamon/error_model.hpp"
#include "jepamon/errors.hpp"
#include "jepamon/synth.hpp"
#include "jepamon/track_io.hpp"
#include "test_util.hpp"

namespace jepamon {
namespace {

using testing::random_track;

TEST(ObjectModel, WrapAngleRange) {
  for (double a : {-10.0, -std::numbers::pi, 0.0, 3.0, std::numbers::pi, 7.5, 100.0}) {
    const double w = wrap_angle(a);
    EXPECT_GE(w, -std::numbers::pi);
    EXPECT_LT(w, std::numbers::pi);
    EXPECT_NEAR(std::remainder(w - a, 2 * std::numbers::pi), 0.0, 1e-12);
  }
  EXPECT_EQ(wrap_angle(std::numbers::pi), -std::numbers::pi);
}

TEST(ObjectModel, FeatureNames) {
  for (Feature f : {Feature::kX, Feature::kY, Feature::kV, Feature::kPsi}) {
    EXPECT_EQ(parse_feature(feature_name(f)), f);
  }
  EXPECT_THROW(parse_feature("speed"), ConfigError);
}

TEST(ObjectModel, ValidateTrackRejectsViolations) {
  Rng rng(1);
  ObjectTrack t = random_track(10, rng);
  EXPECT_NO_THROW(validate_track(t));
  ObjectTrack shorter = t;
  shorter.states.resize(7);
  EXPECT_THROW(validate_track(shorter), Error);
  ObjectTrack neg = t;
  neg.states[3].v = -0.1;
  EXPECT_THROW(validate_track(neg), Error);
  ObjectTrack angle = t;
  angle.states[2].psi = 4.0;
  EXPECT_THROW(validate_track(angle), Error);
  ObjectTrack nan = t;
  nan.states[0].x = std::nan("");
  EXPECT_THROW(validate_track(nan), Error);
}

TEST(ObjectModel, FeatureMatrixRoundTrip) {
  Rng rng(2);
  const ObjectTrack t = random_track(12, rng, "a");
  const FeatureMatrix m = to_feature_matrix(t);
  ASSERT_EQ(m.rows(), 12);
  ASSERT_EQ(m.cols(), kNumFeatures);
  EXPECT_EQ(m(4, 2), t.states[4].v);
  EXPECT_EQ(from_feature_matrix(m, t.scene_id, t.id, t.t0), t);
}

TEST(ObjectModel, StandardizeRoundTripAndMoments) {
  Rng rng(3);
  std::vector<ObjectTrack> tracks;
  for (int i = 0; i < 20; ++i) tracks.push_back(random_track(8 + i, rng, "o" + std::to_string(i)));
  const NormStats stats = fit_stats(tracks);
  Matrix all(0, kNumFeatures);
  for (const auto& t : tracks) {
    const Matrix z = standardize(to_feature_matrix(t), stats);
    Matrix grown(all.rows() + z.rows(), kNumFeatures);
    grown << all, z;
    all = grown;
    EXPECT_LT((destandardize(z, stats) - to_feature_matrix(t)).cwiseAbs().maxCoeff(), 1e-12);
  }
  for (int f = 0; f < kNumFeatures; ++f) {
    const double mean = all.col(f).mean();
    const double var = (all.col(f).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-12);
  }
  // An extra mask column is carried through untouched.
  Matrix five = Matrix::Ones(8, 5);
  EXPECT_EQ(standardize(five, stats).col(4), five.col(4));
}

TEST(ObjectModel, FitStatsRejectsDegenerateInput) {
  EXPECT_THROW(fit_stats(std::vector<ObjectTrack>{}), Error);
  Rng rng(4);
  ObjectTrack t = random_track(8, rng);
  for (auto& s : t.states) s.v = 2.0;
  EXPECT_THROW(fit_stats(std::vector<ObjectTrack>{t}), Error);
}

TEST(TrackIo, RoundTripIsExact) {
  Rng rng(5);
  std::vector<ObjectTrack> tracks;
  for (int i = 0; i < 5; ++i) tracks.push_back(random_track(8 + i, rng, "o" + std::to_string(i)));
  tracks[1].label = 1;
  tracks[2].label = 0;
  tracks[3].scene_id = "other";
  tracks[3].t0 = 17;
  std::stringstream buf;
  write_tracks(buf, tracks);
  EXPECT_EQ(read_tracks(buf), tracks);

  const auto dir = testing::temp_dir("trackio");
  save_tracks(tracks, dir / "t.ndjson");
  const auto lists = load_object_lists(dir / "t.ndjson");
  ASSERT_EQ(lists.size(), 2u);
  EXPECT_EQ(lists[0].tracks.size(), 4u);
  EXPECT_EQ(lists[1].scene_id, "other");
  save_object_lists(lists, dir / "l.ndjson");
  EXPECT_EQ(load_tracks(dir / "l.ndjson").size(), 5u);
}

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_tracks(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TEST(TrackIo, ParseErrorsCarryLineNumbers) {
  Rng rng(6);
  std::stringstream good;
  write_tracks(good, std::vector<ObjectTrack>{random_track(8, rng)});
  const std::string ok = good.str();
  EXPECT_EQ(parse_error_line(ok + "{not json\n"), 2u);
  EXPECT_EQ(parse_error_line(ok + ok + "[1, 2]\n"), 3u);
  EXPECT_EQ(parse_error_line(R"({"scene_id": "s", "t0": 0, "dt": 0.5, "states": []})" "\n"), 1u);
  EXPECT_EQ(parse_error_line(
                R"({"scene_id": "s", "id": "a", "t0": 0, "dt": 0.5, "states": [[1, 2, 3]]})" "\n"),
            1u);
  EXPECT_EQ(parse_error_line(ok + "\n" +
                             R"({"scene_id": "s", "id": "a", "t0": 0, "dt": 0.5, "states": [], "label": 2})"
                             "\n"),
            3u);
}

TEST(TrackIo, DuplicateIdsRejected) {
  Rng rng(7);
  const std::vector<ObjectTrack> tracks{random_track(8, rng, "a"), random_track(8, rng, "a")};
  EXPECT_THROW(group_by_scene(tracks), Error);
}

SceneConfig noiseless() {
  SceneConfig c;
  c.noise_std = {0.0, 0.0, 0.0, 0.0};
  return c;
}

TEST(Synth, NoiselessConstantVelocityIsExact) {
  SceneConfig c = noiseless();
  c.p_constant_velocity = 1.0;
  c.p_constant_turn = 0.0;
  c.speed_min = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    const GeneratedScene scene = generate_scene_with_truth(c, "s");
    for (std::size_t k = 0; k < scene.list.tracks.size(); ++k) {
      const ObjectTrack& t = scene.list.tracks[k];
      const TrackTruth& g = scene.truth[k];
      validate_track(t);
      EXPECT_EQ(t.t0, g.start);
      for (int i = 0; i < t.length(); ++i) {
        const double time = (g.start + i) * kSampleInterval;
        EXPECT_NEAR(t.states[i].x, g.x0 + g.speed * std::cos(g.psi0) * time, 1e-9);
        EXPECT_NEAR(t.states[i].y, g.y0 + g.speed * std::sin(g.psi0) * time, 1e-9);
        EXPECT_EQ(t.states[i].v, g.speed);
        EXPECT_EQ(t.states[i].psi, g.psi0);
      }
    }
  }
}

TEST(Synth, NoiselessConstantTurnFollowsClosedForm) {
  SceneConfig c = noiseless();
  c.p_constant_velocity = 0.0;
  c.p_constant_turn = 1.0;
  c.turn_rate_min = 0.1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    const GeneratedScene scene = generate_scene_with_truth(c, "s");
    for (std::size_t k = 0; k < scene.list.tracks.size(); ++k) {
      const ObjectTrack& t = scene.list.tracks[k];
      const TrackTruth& g = scene.truth[k];
      const double r = g.speed / g.turn_rate;
      for (int i = 0; i < t.length(); ++i) {
        const double psi = g.psi0 + g.turn_rate * (g.start + i) * kSampleInterval;
        EXPECT_NEAR(t.states[i].x, g.x0 + r * (std::sin(psi) - std::sin(g.psi0)), 1e-9);
        EXPECT_NEAR(t.states[i].y, g.y0 - r * (std::cos(psi) - std::cos(g.psi0)), 1e-9);
        EXPECT_NEAR(std::remainder(t.states[i].psi - psi, 2 * std::numbers::pi), 0.0, 1e-9);
      }
    }
  }
}

TEST(Synth, ObservationNoiseHasConfiguredStd) {
  SceneConfig c;
  c.p_constant_velocity = 1.0;
  c.p_constant_turn = 0.0;
  c.speed_min = 5.0;  // keeps the speed floor out of reach
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    c.seed = seed;
    const GeneratedScene scene = generate_scene_with_truth(c, "s");
    for (std::size_t k = 0; k < scene.list.tracks.size(); ++k) {
      for (const ObjectState& s : scene.list.tracks[k].states) {
        const double e = s.v - scene.truth[k].speed;
        sum += e;
        sum2 += e * e;
        ++n;
      }
    }
  }
  ASSERT_GT(n, 10000u);
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 4 * 0.2 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.2, 0.01);
}

TEST(Synth, DeterministicAndSplitsDiffer) {
  SceneConfig c;
  const LabeledDataset a = generate_dataset(c, 5, 3, 42);
  const LabeledDataset b = generate_dataset(c, 5, 3, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, generate_dataset(c, 5, 3, 43).train);
  for (const auto& t : a.train) {
    validate_track(t);
    EXPECT_EQ(t.scene_id.rfind("train-", 0), 0u);
  }
  for (const auto& t : a.test) EXPECT_EQ(t.scene_id.rfind("test-", 0), 0u);
}

TEST(Synth, TrackCountNearExpectation) {
  SceneConfig c;
  c.truncation_prob = 0.0;
  const int scenes = 400;
  const LabeledDataset d = generate_dataset(c, scenes, 1, 7);
  // Without truncation every object yields a track (start leaves >= 8 steps).
  const double expected = scenes * c.mean_objects();
  const double sd = std::sqrt(scenes * (std::pow(c.max_objects - c.min_objects + 1, 2) - 1) / 12.0);
  EXPECT_NEAR(static_cast<double>(d.train.size()), expected, 4 * sd);
}

TEST(Synth, ConfigValidationAndJson) {
  SceneConfig c;
  c.p_constant_velocity = 0.8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.duration_steps = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  nlohmann::json j;
  to_json(j, SceneConfig{});
  SceneConfig back;
  from_json(j, back);
  nlohmann::json again;
  to_json(again, back);
  EXPECT_EQ(j, again);
  j["bogus"] = 1;
  EXPECT_THROW(from_json(j, back), ConfigError);
}

TEST(ErrorModel, SingleStepSingleFeatureChanged) {
  Rng rng(8);
  Rng inject_rng(9);
  const ErrorSpec spec;
  for (int trial = 0; trial < 100; ++trial) {
    const ObjectTrack t = random_track(8 + trial % 33, rng);
    const auto [bad, rec] = inject(t, spec, inject_rng);
    int changed = 0;
    for (int i = 0; i < t.length(); ++i) {
      if (!(bad.states[i] == t.states[i])) {
        ++changed;
        EXPECT_EQ(i, rec.step);
        EXPECT_EQ(bad.states[i].x, t.states[i].x);
        EXPECT_EQ(bad.states[i].psi, t.states[i].psi);
        EXPECT_NEAR(bad.states[i].v - t.states[i].v, rec.theta, 1e-12);
      }
    }
    EXPECT_EQ(changed, 1);
    EXPECT_FALSE(rec.clamped);
  }
}

TEST(ErrorModel, ThetaMomentsAndUniformStep) {
  Rng rng(10);
  Rng inject_rng(11);
  const ErrorSpec spec;
  const ObjectTrack t = random_track(10, rng);
  const int n = 40000;
  double sum = 0.0, sum2 = 0.0;
  std::vector<int> hits(10, 0);
  for (int i = 0; i < n; ++i) {
    const auto rec = inject(t, spec, inject_rng).second;
    sum += rec.theta;
    sum2 += rec.theta * rec.theta;
    ++hits[rec.step];
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 5.0, 4 * 0.1 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sum2 / n - mean * mean), 0.1, 0.003);
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(n), 0.1, 0.01);
}

TEST(ErrorModel, ClampAndWrap) {
  Rng rng(12);
  Rng inject_rng(13);
  ObjectTrack t = random_track(8, rng);
  ErrorSpec neg;
  neg.mu = -100.0;
  const auto [bad, rec] = inject(t, neg, inject_rng);
  EXPECT_TRUE(rec.clamped);
  EXPECT_EQ(bad.states[rec.step].v, 0.0);
  validate_track(bad);
  ErrorSpec angle;
  angle.feature = Feature::kPsi;
  angle.mu = 3.0;
  for (int i = 0; i < 50; ++i) validate_track(inject(t, angle, inject_rng).first);
  ErrorSpec bad_sigma;
  bad_sigma.sigma = -1.0;
  EXPECT_THROW(inject(t, bad_sigma, inject_rng), ConfigError);
}

TEST(ErrorModel, EvalSetBalanceAndRecords) {
  Rng rng(14);
  std::vector<ObjectTrack> test;
  for (int i = 0; i < 101; ++i) test.push_back(random_track(8 + i % 20, rng, "o" + std::to_string(i)));
  const EvalSet set = build_eval_set(test, ErrorSpec{}, 5);
  ASSERT_EQ(set.data.test.size(), test.size());
  int positives = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const ObjectTrack& t = set.data.test[i];
    ASSERT_TRUE(t.label.has_value());
    EXPECT_EQ(set.source[i], i);
    if (*t.label == 1) {
      ++positives;
      ASSERT_LT(r, set.records.size());
      EXPECT_EQ(set.records[r++].track_id, t.id);
      EXPECT_NE(t.states, test[i].states);
    } else {
      EXPECT_EQ(t.states, test[i].states);
    }
  }
  EXPECT_EQ(positives, 50);
  EXPECT_EQ(r, set.records.size());
  // Same seed, same set.
  const EvalSet again = build_eval_set(test, ErrorSpec{}, 5);
  EXPECT_EQ(again.data.test, set.data.test);
  EXPECT_EQ(again.records, set.records);

  const auto dir = testing::temp_dir("inject");
  save_injection_records(set.records, dir / "r.ndjson");
  EXPECT_EQ(load_injection_records(dir / "r.ndjson"), set.records);
}

TEST(ErrorModel, PairedModeDuplicatesEveryTrack) {
  Rng rng(15);
  std::vector<ObjectTrack> test;
  for (int i = 0; i < 10; ++i) test.push_back(random_track(9, rng, "o" + std::to_string(i)));
  const EvalSet set = build_eval_set(test, ErrorSpec{}, 1, true);
  ASSERT_EQ(set.data.test.size(), 20u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(*set.data.test[2 * i].label, 0);
    EXPECT_EQ(*set.data.test[2 * i + 1].label, 1);
    EXPECT_EQ(set.data.test[2 * i].states, test[i].states);
  }
  EXPECT_EQ(set.records.size(), 10u);
}

}  // namespace
}  // namespace jepamon
