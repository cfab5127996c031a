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

#include "jepamon/detect/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <type_traits>

#include "jepamon/errors.hpp"
#include "jepamon/log.hpp"
#include "jepamon/rng.hpp"

namespace jepamon::detect {

namespace {

void require_rows(const Matrix& m, Eigen::Index min_rows, const char* what) {
  if (m.rows() < min_rows) {
    throw Error(std::string(what) + ": need at least " + std::to_string(min_rows) +
                " training points, got " + std::to_string(m.rows()));
  }
  if (!m.allFinite()) throw Error(std::string(what) + ": non-finite training data");
}

void require_dim(std::span<const double> x, Eigen::Index dim, const char* what) {
  if (static_cast<Eigen::Index>(x.size()) != dim) {
    throw Error(std::string(what) + ": query dimension " + std::to_string(x.size()) +
                " does not match model dimension " + std::to_string(dim));
  }
}

Eigen::Map<const RowVector> as_row(std::span<const double> x) {
  return Eigen::Map<const RowVector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// Indices of the k smallest entries of `dist`, ties by lower index, `skip` excluded.
std::vector<int> k_nearest(const Vector& dist, int k, int skip) {
  std::vector<int> idx;
  idx.reserve(dist.size());
  for (int i = 0; i < dist.size(); ++i) {
    if (i != skip) idx.push_back(i);
  }
  auto less = [&](int a, int b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), less);
  idx.resize(k);
  return idx;
}

Vector distances_to(const Matrix& points, const RowVector& q) {
  return (points.rowwise() - q).rowwise().norm();
}

}  // namespace

RowVector summarize(const Matrix& tokens) {
  if (tokens.rows() == 0) throw Error("summarize: empty token matrix");
  return tokens.colwise().maxCoeff();
}

RowVector flatten_track(const ObjectTrack& track, const NormStats& stats, int length) {
  if (length < 1) throw Error("flatten_track: length must be positive");
  const FeatureMatrix z = standardize(to_feature_matrix(track), stats);
  RowVector out = RowVector::Zero(static_cast<Eigen::Index>(length) * kNumFeatures);
  const Eigen::Index rows = std::min<Eigen::Index>(z.rows(), length);
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (int f = 0; f < kNumFeatures; ++f) out[t * kNumFeatures + f] = z(t, f);
  }
  return out;
}

FeatureMatrix unflatten(const RowVector& flat, int rows) {
  if (rows < 0 || static_cast<Eigen::Index>(rows) * kNumFeatures > flat.size()) {
    throw Error("unflatten: row count exceeds vector length");
  }
  FeatureMatrix out(rows, kNumFeatures);
  for (int t = 0; t < rows; ++t) {
    for (int f = 0; f < kNumFeatures; ++f) out(t, f) = flat[t * kNumFeatures + f];
  }
  return out;
}

// ------------------------------------------------------------------ ABOD

double angle_based_outlier_factor(const Matrix& reference, std::span<const double> query,
                                  std::optional<Eigen::Index> skip_row) {
  require_dim(query, reference.cols(), "abod");
  const RowVector q = as_row(query);
  Matrix diff(reference.rows(), reference.cols());
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    if (skip_row && *skip_row == i) continue;
    diff.row(n) = reference.row(i) - q;
    if (diff.row(n).squaredNorm() > 0.0) ++n;
  }
  if (n < 2) {
    warn("abod: fewer than two reference points distinct from the query; scoring as maximal anomaly");
    return 0.0;
  }
  diff.conservativeResize(n, Eigen::NoChange);
  const Vector sq = diff.rowwise().squaredNorm();
  const Vector norm = sq.cwiseSqrt();
  Matrix gram(n, n);
  gram.noalias() = diff * diff.transpose();

  double sw = 0.0, swx = 0.0, swx2 = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const double* ga = gram.data() + a * n;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double w = 1.0 / (norm[a] * norm[b]);
      const double x = ga[b] / (sq[a] * sq[b]);
      sw += w;
      swx += w * x;
      swx2 += w * x * x;
    }
  }
  const double mean = swx / sw;
  return std::max(0.0, swx2 / sw - mean * mean);
}

AbodModel abod_fit(const Matrix& train, std::size_t max_reference, std::uint64_t seed) {
  require_rows(train, 3, "abod");
  if (max_reference < 3) throw Error("abod: max_reference must be at least 3");
  AbodModel m;
  const auto n = static_cast<std::size_t>(train.rows());
  std::vector<Eigen::Index> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (n > max_reference) {
    Rng rng = make_rng(seed, {0xab0d});
    std::vector<Eigen::Index> picked;
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), max_reference, rng);
    rows = std::move(picked);
  }
  m.reference.resize(static_cast<Eigen::Index>(rows.size()), train.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.reference.row(static_cast<Eigen::Index>(i)) = train.row(rows[i]);
  }
  m.reference_rows = std::move(rows);
  return m;
}

double abod_score(const AbodModel& model, std::span<const double> query) {
  return -angle_based_outlier_factor(model.reference, query);
}

// ------------------------------------------------------------------- LOF

LofModel lof_fit(const Matrix& train, int k) {
  if (k < 1) throw Error("lof: k must be positive");
  require_rows(train, k + 1, "lof");
  LofModel m;
  m.train = train;
  m.k = k;
  const auto n = static_cast<int>(train.rows());
  m.k_distance.resize(n);
  m.neighbors.resize(n);
  std::vector<Vector> dist_to(n);
  for (int i = 0; i < n; ++i) {
    Vector d = distances_to(train, train.row(i));
    m.neighbors[i] = k_nearest(d, k, i);
    m.k_distance[i] = d[m.neighbors[i].back()];
    Vector nd(k);
    for (int j = 0; j < k; ++j) nd[j] = d[m.neighbors[i][j]];
    dist_to[i] = std::move(nd);
  }
  m.lrd.resize(n);
  for (int i = 0; i < n; ++i) {
    double reach = 0.0;
    for (int j = 0; j < k; ++j) {
      reach += std::max(m.k_distance[m.neighbors[i][j]], dist_to[i][j]);
    }
    m.lrd[i] = 1.0 / std::max(reach / k, kLofDistanceFloor);
  }
  m.train_lof.resize(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int o : m.neighbors[i]) s += m.lrd[o];
    m.train_lof[i] = s / (k * m.lrd[i]);
  }
  return m;
}

double lof_score(const LofModel& model, std::span<const double> query) {
  require_dim(query, model.train.cols(), "lof");
  const Vector d = distances_to(model.train, as_row(query));
  const std::vector<int> nn = k_nearest(d, model.k, -1);
  double reach = 0.0, lrd_sum = 0.0;
  for (int o : nn) {
    reach += std::max(model.k_distance[o], d[o]);
    lrd_sum += model.lrd[o];
  }
  const double lrd_q = 1.0 / std::max(reach / model.k, kLofDistanceFloor);
  return lrd_sum / (model.k * lrd_q);
}

// ------------------------------------------------------------------- GMM

namespace {

// Per-component log N(x | mean_k, diag(var_k)) + log w_k, for every row.
Matrix weighted_log_densities(const GmmModel& g, const Matrix& x) {
  const Eigen::Index n = x.rows(), kc = g.means.rows(), d = x.cols();
  Matrix out(n, kc);
  for (Eigen::Index c = 0; c < kc; ++c) {
    const RowVector inv = g.variances.row(c).cwiseInverse();
    const double log_norm = std::log(g.weights[c]) -
                            0.5 * (d * std::log(2.0 * std::numbers::pi) +
                                   g.variances.row(c).array().log().sum());
    const Matrix centered = x.rowwise() - g.means.row(c);
    out.col(c) = (log_norm - 0.5 * (centered.array().square().rowwise() * inv.array()).rowwise().sum()).matrix();
  }
  return out;
}

Vector log_sum_exp_rows(const Matrix& m) {
  const Vector mx = m.rowwise().maxCoeff();
  return mx.array() + (m.colwise() - mx).array().exp().rowwise().sum().log();
}

Matrix kmeans_pp(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> dd(d2.data(), d2.data() + n);
      pick = dd(rng);
    } else {
      pick = first(rng);
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

namespace {

GmmModel run_em(const Matrix& train, const GmmOptions& options, std::uint64_t stream) {
  const Eigen::Index n = train.rows();
  const int kc = options.components;
  Rng rng = make_rng(options.seed, {0x636d, stream});

  GmmModel g;
  g.means = kmeans_pp(train, kc, rng);
  const RowVector mean = train.colwise().mean();
  const RowVector var =
      ((train.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n))
          .max(kGmmVarianceFloor)
          .matrix();
  g.variances = var.replicate(kc, 1);
  g.weights = Vector::Constant(kc, 1.0 / kc);

  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    // E step.
    const Matrix logp = weighted_log_densities(g, train);
    const Vector lse = log_sum_exp_rows(logp);
    const double ll = lse.mean();
    const Matrix resp = (logp.colwise() - lse).array().exp().matrix();
    // M step.
    const Vector nk = resp.colwise().sum().transpose().array() + 1e-300;
    g.weights = nk / static_cast<double>(n);
    g.means = (resp.transpose() * train).array().colwise() / nk.array();
    const Matrix second = resp.transpose() * train.array().square().matrix();
    g.variances = ((second.array().colwise() / nk.array()) - g.means.array().square())
                      .max(kGmmVarianceFloor)
                      .matrix();
    g.iterations = it + 1;
    g.log_likelihood.push_back(ll);
    if (it > 0 && ll - previous < options.tolerance) {
      g.converged = true;
      break;
    }
    previous = ll;
  }
  return g;
}

// A component is collapsed when it owns (almost) no data or sits entirely on the floor.
bool collapsed(const GmmModel& g, Eigen::Index n) {
  for (Eigen::Index c = 0; c < g.weights.size(); ++c) {
    if (g.weights[c] * static_cast<double>(n) < 1.0) return true;
    if ((g.variances.row(c).array() <= kGmmVarianceFloor).all()) return true;
  }
  return false;
}

}  // namespace

GmmModel gmm_fit(const Matrix& train, const GmmOptions& options) {
  if (options.components < 1) throw Error("gmm: components must be positive");
  if (options.max_iterations < 1) throw Error("gmm: max_iterations must be positive");
  require_rows(train, 5 * static_cast<Eigen::Index>(options.components), "gmm");
  GmmModel g = run_em(train, options, 0);
  if (collapsed(g, train.rows())) {
    g = run_em(train, options, 1);
    if (collapsed(g, train.rows())) {
      g.collapsed = true;
      warn("gmm: a mixture component collapsed after refitting");
    }
  }
  return g;
}

double gmm_log_density(const GmmModel& model, std::span<const double> x) {
  require_dim(x, model.means.cols(), "gmm");
  Matrix row = as_row(x);
  return log_sum_exp_rows(weighted_log_densities(model, row))[0];
}

double gmm_score(const GmmModel& model, std::span<const double> x) {
  return -gmm_log_density(model, x);
}

// -------------------------------------------------------------- Detector

std::string_view detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kAbod: return "ABOD";
    case DetectorKind::kLof: return "LOF";
    case DetectorKind::kGmm: return "GMM";
  }
  return "?";
}

DetectorKind parse_detector(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "abod") return DetectorKind::kAbod;
  if (lower == "lof") return DetectorKind::kLof;
  if (lower == "gmm") return DetectorKind::kGmm;
  throw ConfigError("unknown detector \"" + std::string(name) + "\" (expected abod, lof or gmm)");
}

double calibrate_threshold(std::span<const double> train_scores, double quantile) {
  if (train_scores.empty()) throw Error("threshold: no training scores");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw Error("threshold: quantile outside [0, 1]");
  std::vector<double> s(train_scores.begin(), train_scores.end());
  std::sort(s.begin(), s.end());
  const double pos = quantile * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

FittedDetector FittedDetector::fit(DetectorKind kind, const Matrix& train,
                                   const DetectorOptions& options) {
  FittedDetector det;
  det.kind_ = kind;
  det.dimension_ = static_cast<int>(train.cols());
  const auto n = static_cast<std::size_t>(train.rows());
  det.train_scores_.resize(n);
  switch (kind) {
    case DetectorKind::kAbod: {
      AbodModel m = abod_fit(train, options.abod_max_reference, options.seed);
      // Reference points are scored without themselves.
      std::vector<Eigen::Index> self(n, -1);
      for (std::size_t r = 0; r < m.reference_rows.size(); ++r) {
        self[m.reference_rows[r]] = static_cast<Eigen::Index>(r);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        std::span<const double> x(train.data() + row * train.cols(), train.cols());
        std::optional<Eigen::Index> skip;
        if (self[i] >= 0) skip = self[i];
        det.train_scores_[i] = -angle_based_outlier_factor(m.reference, x, skip);
      }
      det.model_ = std::move(m);
      break;
    }
    case DetectorKind::kLof: {
      LofModel m = lof_fit(train, options.lof_neighbors);
      for (std::size_t i = 0; i < n; ++i) det.train_scores_[i] = m.train_lof[static_cast<Eigen::Index>(i)];
      det.model_ = std::move(m);
      break;
    }
    case DetectorKind::kGmm: {
      GmmOptions go;
      go.components = options.gmm_components;
      go.seed = options.seed;
      GmmModel m = gmm_fit(train, go);
      det.model_ = std::move(m);
      det.train_scores_ = det.score_all(train);
      break;
    }
  }
  det.threshold_ = calibrate_threshold(det.train_scores_, options.threshold_quantile);
  return det;
}

double FittedDetector::score(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, AbodModel>) {
          return abod_score(m, x);
        } else if constexpr (std::is_same_v<M, LofModel>) {
          return lof_score(m, x);
        } else {
          return gmm_score(m, x);
        }
      },
      model_);
}

std::vector<double> FittedDetector::score_all(const Matrix& points) const {
  if (points.cols() != dimension_) {
    throw Error("detector: input dimension " + std::to_string(points.cols()) +
                " does not match fitted dimension " + std::to_string(dimension_));
  }
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        score(std::span<const double>(points.data() + i * points.cols(), points.cols()));
  }
  return out;
}

BaselineResult baseline_detect(std::span<const ObjectTrack> train_tracks,
                               std::span<const ObjectTrack> test_tracks, DetectorKind kind,
                               const DetectorOptions& options, int length) {
  const NormStats stats = fit_stats(train_tracks);
  auto stack = [&](std::span<const ObjectTrack> tracks) {
    Matrix m(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(length) * kNumFeatures);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = flatten_track(tracks[i], stats, length);
    }
    return m;
  };
  BaselineResult r{FittedDetector::fit(kind, stack(train_tracks), options), {}};
  r.scores = r.detector.score_all(stack(test_tracks));
  return r;
}

}  // namespace jepamon::detect
