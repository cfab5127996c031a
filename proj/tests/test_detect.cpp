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

#include "jepamon/detect/detectors.hpp"
#include "jepamon/errors.hpp"
#include "jepamon/log.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace jepamon::detect {
namespace {

using testing::random_matrix;

std::vector<oracle::Point> rows(const Matrix& m) {
  std::vector<oracle::Point> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
  return out;
}

std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

// Silences expected warnings for the lifetime of the guard.
struct QuietWarnings {
  WarningSink previous = set_warning_sink(nullptr);
  int count = 0;
  QuietWarnings() { set_warning_sink([this](std::string_view) { ++count; }); }
  ~QuietWarnings() { set_warning_sink(previous); }
};

// ------------------------------------------------------------- summarize

TEST(Summarize, ColumnwiseMaximum) {
  Rng rng(1);
  const Matrix z = random_matrix(5, 3, rng);
  const RowVector s = summarize(z);
  for (int d = 0; d < 3; ++d) {
    double m = -1e300;
    for (int t = 0; t < 5; ++t) m = std::max(m, z(t, d));
    EXPECT_EQ(s[d], m);
  }
  EXPECT_EQ(summarize(z.topRows(1)), RowVector(z.row(0)));
  EXPECT_THROW(summarize(Matrix(0, 3)), Error);
}

TEST(Summarize, PermutationInvariantAndIdempotentUnderDuplication) {
  Rng rng(2);
  const Matrix z = random_matrix(6, 4, rng);
  Matrix perm = z.colwise().reverse();
  Matrix dup(12, 4);
  dup << z, z;
  EXPECT_EQ(summarize(perm), summarize(z));
  EXPECT_EQ(summarize(dup), summarize(z));
}

// ------------------------------------------------------------------ ABOD

class AbodOracle : public ::testing::TestWithParam<int> {};

TEST_P(AbodOracle, MatchesBruteForce) {
  const int dim = GetParam();
  Rng rng(3 + dim);
  const Matrix train = random_matrix(50, dim, rng);
  const Matrix queries = random_matrix(8, dim, rng, 2.0);
  const AbodModel m = abod_fit(train);
  ASSERT_EQ(m.reference.rows(), 50);  // exact below the subsampling size
  const auto ref = rows(train);
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const double expect = oracle::abof(ref, rows(queries)[i]);
    const double got = -abod_score(m, row_span(queries, i));
    EXPECT_NEAR(got, expect, 1e-9 * std::max(1.0, std::abs(expect)));
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, AbodOracle, ::testing::Values(2, 32));

TEST(Abod, SixPointsInPlane) {
  Rng rng(4);
  const Matrix pts = random_matrix(6, 2, rng);
  const Matrix q = random_matrix(1, 2, rng);
  EXPECT_NEAR(angle_based_outlier_factor(pts, row_span(q, 0)), oracle::abof(rows(pts), rows(q)[0]), 1e-9);
}

TEST(Abod, CentroidIsLessAnomalousThanFarPoint) {
  Matrix square(4, 2);
  square << 0, 0, 1, 0, 0, 1, 1, 1;
  const AbodModel m = abod_fit(square);
  const std::vector<double> centre{0.5, 0.5}, far{10.0, 10.0};
  EXPECT_GT(angle_based_outlier_factor(square, centre), angle_based_outlier_factor(square, far));
  EXPECT_LT(abod_score(m, centre), abod_score(m, far));
}

TEST(Abod, SkipsCoincidentPointsAndFlagsDegenerateQueries) {
  QuietWarnings quiet;
  Matrix pts(4, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1;
  // Query equal to a reference point: that point is skipped.
  const std::vector<double> q{1.0, 1.0};
  EXPECT_NEAR(angle_based_outlier_factor(pts, q), oracle::abof(rows(pts), q), 1e-12);
  EXPECT_EQ(quiet.count, 0);
  Matrix same(3, 2);
  same << 2, 2, 2, 2, 2, 2;
  const std::vector<double> q2{2.0, 2.0};
  EXPECT_EQ(angle_based_outlier_factor(same, q2), 0.0);
  EXPECT_EQ(quiet.count, 1);
}

TEST(Abod, SubsamplesLargeTrainingSets) {
  Rng rng(5);
  const Matrix train = random_matrix(120, 3, rng);
  const AbodModel m = abod_fit(train, 40, 9);
  EXPECT_EQ(m.reference.rows(), 40);
  for (std::size_t r = 0; r < m.reference_rows.size(); ++r) {
    EXPECT_EQ(RowVector(m.reference.row(static_cast<Eigen::Index>(r))), RowVector(train.row(m.reference_rows[r])));
  }
  const AbodModel again = abod_fit(train, 40, 9);
  EXPECT_EQ(again.reference, m.reference);
  EXPECT_EQ(abod_fit(train, 500).reference, train);
}

// ------------------------------------------------------------------- LOF

class LofOracle : public ::testing::TestWithParam<int> {};

TEST_P(LofOracle, MatchesNaiveImplementation) {
  const int dim = GetParam();
  Rng rng(6 + dim);
  const Matrix train = random_matrix(50, dim, rng);
  const Matrix queries = random_matrix(6, dim, rng, 1.5);
  const LofModel m = lof_fit(train, 15);
  const oracle::Lof ref{rows(train), 15};
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    EXPECT_NEAR(lof_score(m, row_span(queries, i)), ref.lof(rows(queries)[i]), 1e-9);
  }
  for (std::size_t i = 0; i < 50; i += 7) {
    EXPECT_NEAR(m.train_lof[static_cast<Eigen::Index>(i)], ref.lof(ref.data[i], i), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, LofOracle, ::testing::Values(2, 32));

TEST(Lof, GridInteriorIsAboutOne) {
  Matrix grid(100, 2);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) grid.row(i * 10 + j) << i, j;
  }
  const LofModel m = lof_fit(grid, 15);
  const std::vector<double> q{4.5, 4.5};
  EXPECT_NEAR(lof_score(m, q), 1.0, 0.1);
}

TEST(Lof, ClusterAndFarPoint) {
  Rng rng(7);
  Matrix pts(21, 2);
  pts.topRows(20) = random_matrix(20, 2, rng, 0.1);
  pts.row(20) << 5.0, 5.0;
  const LofModel m = lof_fit(pts, 15);
  const oracle::Lof ref{rows(pts), 15};
  EXPECT_GT(m.train_lof[20], 1.5);
  for (int i = 0; i < 20; ++i) {
    EXPECT_LT(m.train_lof[i], 1.2);
    EXPECT_NEAR(m.train_lof[i], ref.lof(ref.data[i], i), 1e-9);
  }
}

TEST(Lof, DuplicatePointsStayFinite) {
  Matrix pts = Matrix::Zero(20, 2);
  pts.row(19) << 1.0, 1.0;
  const LofModel m = lof_fit(pts, 5);
  EXPECT_TRUE(m.lrd.allFinite());
  EXPECT_TRUE(m.train_lof.allFinite());
  const std::vector<double> q{0.0, 0.0};
  EXPECT_TRUE(std::isfinite(lof_score(m, q)));
}

TEST(Lof, NeedsMoreThanKPoints) {
  Rng rng(8);
  EXPECT_THROW(lof_fit(random_matrix(15, 2, rng), 15), Error);
  EXPECT_NO_THROW(lof_fit(random_matrix(16, 2, rng), 15));
}

// ------------------------------------------------------------------- GMM

TEST(Gmm, SingleComponentMatchesSampleMoments) {
  Rng rng(9);
  Matrix x = random_matrix(400, 3, rng, 2.0);
  x.col(1).array() += 4.0;
  GmmOptions o;
  o.components = 1;
  const GmmModel g = gmm_fit(x, o);
  const RowVector mean = x.colwise().mean();
  const RowVector var = (x.rowwise() - mean).array().square().colwise().mean();
  EXPECT_NEAR(g.weights[0], 1.0, 1e-12);
  EXPECT_LT((g.means.row(0) - mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((g.variances.row(0) - var).cwiseAbs().maxCoeff(), 1e-6);
}

class GmmDensity : public ::testing::TestWithParam<int> {};

TEST_P(GmmDensity, MatchesClosedForm) {
  const int dim = GetParam();
  Rng rng(10 + dim);
  const Matrix x = random_matrix(50, dim, rng);
  const GmmModel g = gmm_fit(x, {.components = 3, .seed = 2});
  std::vector<double> w(g.weights.data(), g.weights.data() + g.weights.size());
  const auto mu = rows(g.means), var = rows(g.variances);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double expect = oracle::gmm_log_density(w, mu, var, rows(x)[i]);
    EXPECT_NEAR(gmm_log_density(g, row_span(x, i)), expect, 1e-9 * std::max(1.0, std::abs(expect)));
    EXPECT_EQ(gmm_score(g, row_span(x, i)), -gmm_log_density(g, row_span(x, i)));
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, GmmDensity, ::testing::Values(2, 32));

TEST(Gmm, EmIsMonotoneAndParametersValid) {
  Rng rng(11);
  Matrix x(300, 2);
  x.topRows(150) = random_matrix(150, 2, rng, 0.5);
  x.bottomRows(150) = (random_matrix(150, 2, rng, 0.8).array() + 4.0).matrix();
  const GmmModel g = gmm_fit(x, {});
  ASSERT_GE(g.log_likelihood.size(), 2u);
  for (std::size_t i = 1; i < g.log_likelihood.size(); ++i) {
    EXPECT_GE(g.log_likelihood[i], g.log_likelihood[i - 1] - 1e-12);
  }
  EXPECT_NEAR(g.weights.sum(), 1.0, 1e-12);
  EXPECT_TRUE((g.weights.array() >= 0.0).all());
  EXPECT_TRUE((g.variances.array() >= kGmmVarianceFloor).all());
  EXPECT_TRUE(g.converged || g.iterations == 200);
}

TEST(Gmm, DeterministicGivenSeedAndOrientedByLikelihood) {
  Rng rng(12);
  const Matrix x = random_matrix(200, 4, rng);
  const GmmModel a = gmm_fit(x, {.seed = 5}), b = gmm_fit(x, {.seed = 5});
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.variances, b.variances);
  const std::vector<double> far{10, 10, 10, 10};
  EXPECT_LT(gmm_score(a, row_span(x, 0)), gmm_score(a, far));
}

TEST(Gmm, RequiresEnoughPoints) {
  Rng rng(13);
  EXPECT_THROW(gmm_fit(random_matrix(24, 2, rng), {}), Error);
  EXPECT_NO_THROW(gmm_fit(random_matrix(25, 2, rng), {}));
}

TEST(Gmm, VarianceFloorOnDegenerateData) {
  QuietWarnings quiet;
  Matrix x = Matrix::Zero(40, 2);
  x.col(0).setLinSpaced(40, 0.0, 1.0);
  const GmmModel g = gmm_fit(x, {.components = 2});
  EXPECT_TRUE((g.variances.array() >= kGmmVarianceFloor).all());
  EXPECT_TRUE(std::isfinite(gmm_score(g, std::vector<double>{0.5, 0.0})));
}

// ----------------------------------------------------------- Calibration

TEST(Threshold, LinearInterpolationRule) {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  std::reverse(s.begin(), s.end());
  // position 0.99 * 99 = 98.01 between the 99th (99) and 100th (100) value.
  EXPECT_NEAR(calibrate_threshold(s, 0.99), 99.01, 1e-12);
  EXPECT_EQ(calibrate_threshold(s, 1.0), 100.0);
  EXPECT_EQ(calibrate_threshold(s, 0.0), 1.0);
  const std::vector<double> same(10, 3.5);
  EXPECT_EQ(calibrate_threshold(same, 0.99), 3.5);
  EXPECT_THROW(calibrate_threshold(std::vector<double>{}, 0.99), Error);
}

TEST(Threshold, FalsePositiveRateNearOneMinusQuantile) {
  Rng rng(14);
  std::normal_distribution<double> g;
  std::vector<double> train(5000), fresh(5000);
  for (auto& v : train) v = g(rng);
  for (auto& v : fresh) v = g(rng);
  const double tau = calibrate_threshold(train, 0.99);
  const double fpr_train = std::count_if(train.begin(), train.end(), [&](double v) { return v > tau; }) / 5000.0;
  const double fpr_fresh = std::count_if(fresh.begin(), fresh.end(), [&](double v) { return v > tau; }) / 5000.0;
  const double sd = std::sqrt(0.01 * 0.99 / 5000.0);
  EXPECT_NEAR(fpr_train, 0.01, 1e-3);
  EXPECT_NEAR(fpr_fresh, 0.01, 4 * sd);
}

// ------------------------------------------------------ FittedDetector

TEST(FittedDetector, UnifiedOrientationAndCalibration) {
  Rng rng(15);
  const Matrix train = random_matrix(200, 3, rng);
  Matrix far(1, 3);
  far << 8, 8, 8;
  for (const auto kind : {DetectorKind::kAbod, DetectorKind::kLof, DetectorKind::kGmm}) {
    const auto det = FittedDetector::fit(kind, train);
    EXPECT_EQ(det.train_scores().size(), 200u);
    EXPECT_EQ(det.threshold(), calibrate_threshold(det.train_scores(), 0.99));
    const double s_far = det.score(row_span(far, 0));
    EXPECT_GT(s_far, det.threshold()) << detector_name(kind);
    EXPECT_EQ(det.predict(s_far), 1);
    EXPECT_EQ(det.predict(det.threshold()), 0);
    EXPECT_THROW(det.score_all(random_matrix(2, 4, rng)), Error);
  }
}

TEST(FittedDetector, AbodTrainScoresLeaveSelfOut) {
  Rng rng(16);
  const Matrix train = random_matrix(30, 2, rng);
  const auto det = FittedDetector::fit(DetectorKind::kAbod, train);
  auto ref = rows(train);
  const auto q = ref[4];
  ref.erase(ref.begin() + 4);
  EXPECT_NEAR(det.train_scores()[4], -oracle::abof(ref, q), 1e-12);
}

TEST(FittedDetector, ParsesNames) {
  EXPECT_EQ(parse_detector("ABOD"), DetectorKind::kAbod);
  EXPECT_EQ(parse_detector("lof"), DetectorKind::kLof);
  EXPECT_EQ(parse_detector("Gmm"), DetectorKind::kGmm);
  EXPECT_THROW(parse_detector("svm"), ConfigError);
  EXPECT_EQ(detector_name(DetectorKind::kLof), "LOF");
}

// -------------------------------------------------------------- Baseline

TEST(Baseline, FlattenRoundTripAndPadding) {
  Rng rng(17);
  const ObjectTrack t40 = testing::random_track(40, rng);
  const std::vector<ObjectTrack> tracks{t40, testing::random_track(12, rng, "o1")};
  const NormStats stats = fit_stats(tracks);
  const RowVector flat = flatten_track(t40, stats);
  ASSERT_EQ(flat.size(), 160);
  EXPECT_LT((unflatten(flat, 40) - standardize(to_feature_matrix(t40), stats)).cwiseAbs().maxCoeff(), 1e-15);
  const RowVector short_flat = flatten_track(tracks[1], stats);
  EXPECT_TRUE((short_flat.tail(160 - 48).array() == 0.0).all());
  const ObjectTrack t50 = testing::random_track(50, rng);
  EXPECT_EQ(flatten_track(t50, stats).head(160), flatten_track(t50, stats, 40));
}

TEST(Baseline, OneScorePerTrack) {
  Rng rng(18);
  std::vector<ObjectTrack> train, test;
  for (int i = 0; i < 60; ++i) train.push_back(testing::random_track(10 + i % 30, rng, "t" + std::to_string(i)));
  for (int i = 0; i < 7; ++i) test.push_back(testing::random_track(8 + i, rng, "q" + std::to_string(i)));
  for (const auto kind : {DetectorKind::kAbod, DetectorKind::kLof, DetectorKind::kGmm}) {
    const auto r = baseline_detect(train, test, kind);
    EXPECT_EQ(r.scores.size(), test.size());
    EXPECT_EQ(r.detector.dimension(), 160);
  }
}

}  // namespace
}  // namespace jepamon::detect
