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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace jepamon::eval {

/// Parallel scores and 0/1 labels; label 1 marks an anomaly.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const;
  std::size_t negatives() const { return size() - positives(); }
  /// Throws unless sizes match, n >= 2, labels are 0/1 and scores finite.
  void validate() const;
  /// validate() plus both classes present.
  void validate_two_class() const;
};

/// A point of the ROC curve. Scores >= threshold are predicted anomalous;
/// the first point uses threshold +inf.
struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
};

using RocCurve = std::vector<RocPoint>;

/// Exact step curve from a descending sweep; tied scores form one step.
RocCurve roc_curve(const ScoredSet& s);
/// Trapezoidal area under roc_curve (the Mann-Whitney statistic, ties 1/2).
double auroc(const ScoredSet& s);
double auroc(const RocCurve& curve);

/// Smallest FPR among ROC points with TPR >= target.
RocPoint fpr_at_tpr(const RocCurve& curve, double target_tpr = 0.95);
/// Largest TPR among ROC points with FPR <= target.
RocPoint tpr_at_fpr(const RocCurve& curve, double target_fpr);
/// ROC point maximizing TPR - FPR (first one in sweep order on ties).
RocPoint youden_point(const RocCurve& curve);

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct ConfusionMetrics {
  ConfusionCounts counts;
  double f1 = 0.0;
  double mcc = 0.0;
  double accuracy = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double precision = 0.0;
};

enum class Comparison { kGreater, kGreaterEqual };

ConfusionCounts confusion_counts(const ScoredSet& s, double threshold,
                                 Comparison cmp = Comparison::kGreater);
/// F1, MCC, accuracy, TPR, FPR, precision. Ratios with a zero denominator
/// are 0; in particular MCC is 0 when any marginal is zero.
ConfusionMetrics metrics_from_counts(const ConfusionCounts& c);
/// Predicts anomalous when score > threshold (or >= with kGreaterEqual).
ConfusionMetrics confusion_metrics(const ScoredSet& s, double threshold,
                                   Comparison cmp = Comparison::kGreater);

struct HistogramGroup {
  std::string name;
  std::vector<double> scores;
};

struct HistogramTable {
  std::vector<double> edges;                 // bins + 1, shared by all groups
  std::vector<std::string> names;
  std::vector<std::vector<std::int64_t>> counts;  // groups x bins
};

/// Bins every group over one range: [lo, hi] if given, else the min/max
/// over all groups. Values outside the range are clamped to the end bins.
HistogramTable score_histogram(std::span<const HistogramGroup> groups, int bins,
                               std::optional<std::pair<double, double>> range = std::nullopt);

double median(std::vector<double> values);

struct OperatingPoints {
  RocPoint fpr95;
  RocPoint tpr5;
  RocPoint tpr1;
  RocPoint youden;
};

struct EvalReport {
  std::string detector;
  std::string source;  // "embedding" or "baseline"
  std::size_t n = 0;
  std::size_t n_anomalous = 0;
  double threshold = 0.0;
  double auroc = 0.0;
  OperatingPoints points;
  ConfusionMetrics at_threshold;
  ConfusionMetrics at_youden;
  RocCurve roc;
  HistogramTable histogram;
};

/// Everything for one scored test set; the histogram splits scores by label.
EvalReport build_report(const ScoredSet& s, const std::string& detector, const std::string& source,
                        double threshold, int histogram_bins = 40);

nlohmann::ordered_json to_json(const ConfusionMetrics& m);
nlohmann::ordered_json to_json(const RocPoint& p);
nlohmann::ordered_json to_json(const HistogramTable& h);
nlohmann::ordered_json to_json(const EvalReport& r);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_histogram_csv(const std::filesystem::path& path, const HistogramTable& h);
/// gnuplot script plotting the given ROC and histogram CSVs to PNG files.
void write_gnuplot_script(const std::filesystem::path& path,
                          std::span<const std::pair<std::string, std::string>> roc_csvs,
                          std::span<const std::pair<std::string, std::string>> histogram_csvs);

}  // namespace jepamon::eval
