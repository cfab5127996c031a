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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jepamon/matrix.hpp"
#include "jepamon/object_model.hpp"

namespace jepamon::detect {

/// Elementwise maximum over the time axis of a T x D token matrix.
RowVector summarize(const Matrix& tokens);

/// Standardized features zero-padded (or truncated) to `length` rows and
/// flattened time-major: (x0, y0, v0, psi0, x1, ...).
RowVector flatten_track(const ObjectTrack& track, const NormStats& stats, int length = 40);
/// Inverse of flatten_track for the first `rows` timesteps (standardized units).
FeatureMatrix unflatten(const RowVector& flat, int rows);

// ------------------------------------------------------------------ ABOD

/// Angle-based outlier factor of `query` against the rows of `reference`:
/// the variance of <a-q, b-q> / (|a-q|^2 |b-q|^2) over unordered pairs
/// {a, b}, each term weighted by 1 / (|a-q| |b-q|). Reference rows that
/// coincide with the query (or `skip_row`) are ignored. Returns 0 (maximal
/// outlierness) when fewer than two usable rows remain.
double angle_based_outlier_factor(const Matrix& reference, std::span<const double> query,
                                  std::optional<Eigen::Index> skip_row = std::nullopt);

struct AbodModel {
  Matrix reference;
  /// Row of every reference point in the training matrix.
  std::vector<Eigen::Index> reference_rows;
};

/// Uses every train point as reference up to `max_reference`; beyond that,
/// a uniform random subset of that size drawn from `seed`.
AbodModel abod_fit(const Matrix& train, std::size_t max_reference = 500, std::uint64_t seed = 0);
/// -ABOF, so larger means more anomalous.
double abod_score(const AbodModel& model, std::span<const double> query);

// ------------------------------------------------------------------- LOF

struct LofModel {
  Matrix train;
  int k = 15;
  Vector k_distance;                       // per train point
  Vector lrd;                              // local reachability density per train point
  Vector train_lof;                        // LOF of every train point (self excluded)
  std::vector<std::vector<int>> neighbors; // k nearest, self excluded
};

inline constexpr double kLofDistanceFloor = 1e-12;

/// Exactly k nearest neighbours per point, ties broken by lower index.
LofModel lof_fit(const Matrix& train, int k = 15);
/// LOF of a point outside the training set; about 1 for inliers.
double lof_score(const LofModel& model, std::span<const double> query);

// ------------------------------------------------------------------- GMM

struct GmmModel {
  Vector weights;    // K
  Matrix means;      // K x D
  Matrix variances;  // K x D, diagonal covariances
  std::vector<double> log_likelihood;  // mean per-sample LL after every EM iteration
  int iterations = 0;
  bool converged = false;
  /// Set when a component still owned no data after one reseeded refit.
  bool collapsed = false;
};

inline constexpr double kGmmVarianceFloor = 1e-6;

struct GmmOptions {
  int components = 5;
  int max_iterations = 200;
  double tolerance = 1e-6;  // on the mean per-sample log-likelihood gain
  std::uint64_t seed = 0;
};

/// EM with k-means++ seeding and diagonal covariances. Needs at least
/// 5 * components points. A collapsed fit is redone once from new seeds.
GmmModel gmm_fit(const Matrix& train, const GmmOptions& options = {});
/// log p(x) under the mixture.
double gmm_log_density(const GmmModel& model, std::span<const double> x);
/// Negative log-likelihood; larger means more anomalous.
double gmm_score(const GmmModel& model, std::span<const double> x);

// -------------------------------------------------------------- Detector

enum class DetectorKind { kAbod, kLof, kGmm };

std::string_view detector_name(DetectorKind kind);
/// "abod", "lof" or "gmm" (case-insensitive).
DetectorKind parse_detector(std::string_view name);

struct DetectorOptions {
  std::size_t abod_max_reference = 500;
  int lof_neighbors = 15;
  int gmm_components = 5;
  double threshold_quantile = 0.99;
  std::uint64_t seed = 0;
};

/// A fitted scorer with a threshold calibrated on its own training scores.
/// All kinds score higher-is-more-anomalous.
class FittedDetector {
 public:
  static FittedDetector fit(DetectorKind kind, const Matrix& train, const DetectorOptions& options = {});

  DetectorKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  double threshold() const { return threshold_; }
  const std::vector<double>& train_scores() const { return train_scores_; }

  double score(std::span<const double> x) const;
  std::vector<double> score_all(const Matrix& points) const;
  int predict(double score) const { return score > threshold_ ? 1 : 0; }

  const std::variant<AbodModel, LofModel, GmmModel>& model() const { return model_; }

 private:
  DetectorKind kind_ = DetectorKind::kAbod;
  int dimension_ = 0;
  std::variant<AbodModel, LofModel, GmmModel> model_;
  std::vector<double> train_scores_;
  double threshold_ = 0.0;
};

/// Empirical q-quantile with linear interpolation between order statistics:
/// position q * (n - 1) in the sorted scores.
double calibrate_threshold(std::span<const double> train_scores, double quantile = 0.99);

struct BaselineResult {
  FittedDetector detector;
  std::vector<double> scores;  // one per test track
};

/// Raw-feature baseline: flatten_track on train and test tracks with
/// train-set normalization, then the same detector and calibration.
BaselineResult baseline_detect(std::span<const ObjectTrack> train_tracks,
                               std::span<const ObjectTrack> test_tracks, DetectorKind kind,
                               const DetectorOptions& options = {}, int length = 40);

}  // namespace jepamon::detect
