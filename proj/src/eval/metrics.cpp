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

#include "jepamon/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "jepamon/errors.hpp"

namespace jepamon::eval {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

void ScoredSet::validate() const {
  if (scores.size() != labels.size()) {
    throw Error("scored set: " + std::to_string(scores.size()) + " scores but " +
                std::to_string(labels.size()) + " labels");
  }
  if (scores.size() < 2) throw Error("scored set: need at least 2 entries");
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error("scored set: labels must be 0 or 1");
  }
  for (double x : scores) {
    if (!std::isfinite(x)) throw Error("scored set: non-finite score");
  }
}

void ScoredSet::validate_two_class() const {
  validate();
  const std::size_t p = positives();
  if (p == 0 || p == size()) throw Error("scored set: both classes are required");
}

RocCurve roc_curve(const ScoredSet& s) {
  s.validate_two_class();
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  const auto pos = static_cast<double>(s.positives());
  const auto neg = static_cast<double>(s.negatives());
  RocCurve curve{RocPoint{}};
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = s.scores[order[i]];
    for (; i < order.size() && s.scores[order[i]] == t; ++i) {
      (s.labels[order[i]] == 1 ? tp : fp) += 1;
    }
    curve.push_back({fp / neg, tp / pos, t});
  }
  return curve;
}

double auroc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  }
  return area;
}

double auroc(const ScoredSet& s) { return auroc(roc_curve(s)); }

RocPoint fpr_at_tpr(const RocCurve& curve, double target_tpr) {
  std::optional<RocPoint> best;
  for (const RocPoint& p : curve) {
    if (p.tpr >= target_tpr && (!best || p.fpr < best->fpr)) best = p;
  }
  if (!best) throw Error("fpr_at_tpr: no point reaches the target TPR");
  return *best;
}

RocPoint tpr_at_fpr(const RocCurve& curve, double target_fpr) {
  std::optional<RocPoint> best;
  for (const RocPoint& p : curve) {
    if (p.fpr <= target_fpr && (!best || p.tpr > best->tpr)) best = p;
  }
  if (!best) throw Error("tpr_at_fpr: empty curve");
  return *best;
}

RocPoint youden_point(const RocCurve& curve) {
  if (curve.empty()) throw Error("youden_point: empty curve");
  RocPoint best = curve.front();
  for (const RocPoint& p : curve) {
    if (p.tpr - p.fpr > best.tpr - best.fpr) best = p;
  }
  return best;
}

ConfusionCounts confusion_counts(const ScoredSet& s, double threshold, Comparison cmp) {
  s.validate();
  ConfusionCounts c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool flagged =
        cmp == Comparison::kGreater ? s.scores[i] > threshold : s.scores[i] >= threshold;
    if (s.labels[i] == 1) {
      (flagged ? c.tp : c.fn) += 1;
    } else {
      (flagged ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

ConfusionMetrics metrics_from_counts(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  ConfusionMetrics m;
  m.counts = c;
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  m.tpr = ratio(tp, tp + fn);
  m.fpr = ratio(fp, fp + tn);
  m.precision = ratio(tp, tp + fp);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
  return m;
}

ConfusionMetrics confusion_metrics(const ScoredSet& s, double threshold, Comparison cmp) {
  return metrics_from_counts(confusion_counts(s, threshold, cmp));
}

HistogramTable score_histogram(std::span<const HistogramGroup> groups, int bins,
                               std::optional<std::pair<double, double>> range) {
  if (bins < 1) throw Error("histogram: bins must be positive");
  double lo = 0.0, hi = 1.0;
  if (range) {
    std::tie(lo, hi) = *range;
    if (!(hi > lo)) throw Error("histogram: empty range");
  } else {
    bool any = false;
    for (const auto& g : groups) {
      for (double x : g.scores) {
        if (!std::isfinite(x)) throw Error("histogram: non-finite score in " + g.name);
        lo = any ? std::min(lo, x) : x;
        hi = any ? std::max(hi, x) : x;
        any = true;
      }
    }
    if (!any) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi == lo) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  HistogramTable h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + b * width;
  h.edges.back() = hi;
  for (const auto& g : groups) {
    h.names.push_back(g.name);
    std::vector<std::int64_t> row(static_cast<std::size_t>(bins), 0);
    for (double x : g.scores) {
      auto b = static_cast<long>(std::floor((x - lo) / width));
      b = std::clamp<long>(b, 0, bins - 1);
      ++row[static_cast<std::size_t>(b)];
    }
    h.counts.push_back(std::move(row));
  }
  return h;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median: no values");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

EvalReport build_report(const ScoredSet& s, const std::string& detector, const std::string& source,
                        double threshold, int histogram_bins) {
  EvalReport r;
  r.detector = detector;
  r.source = source;
  r.n = s.size();
  r.n_anomalous = s.positives();
  r.threshold = threshold;
  r.roc = roc_curve(s);
  r.auroc = auroc(r.roc);
  r.points.fpr95 = fpr_at_tpr(r.roc, 0.95);
  r.points.tpr5 = tpr_at_fpr(r.roc, 0.05);
  r.points.tpr1 = tpr_at_fpr(r.roc, 0.01);
  r.points.youden = youden_point(r.roc);
  r.at_threshold = confusion_metrics(s, threshold);
  r.at_youden = confusion_metrics(s, r.points.youden.threshold, Comparison::kGreaterEqual);
  std::vector<HistogramGroup> groups{{"normal", {}}, {"anomalous", {}}};
  for (std::size_t i = 0; i < s.size(); ++i) groups[s.labels[i]].scores.push_back(s.scores[i]);
  r.histogram = score_histogram(groups, histogram_bins);
  return r;
}

nlohmann::ordered_json to_json(const ConfusionMetrics& m) {
  return {{"tp", m.counts.tp}, {"fp", m.counts.fp},   {"fn", m.counts.fn},
          {"tn", m.counts.tn}, {"f1", m.f1},          {"mcc", m.mcc},
          {"accuracy", m.accuracy}, {"tpr", m.tpr}, {"fpr", m.fpr},
          {"precision", m.precision}};
}

nlohmann::ordered_json to_json(const RocPoint& p) {
  nlohmann::ordered_json j{{"fpr", p.fpr}, {"tpr", p.tpr}};
  if (std::isfinite(p.threshold)) {
    j["threshold"] = p.threshold;
  } else {
    j["threshold"] = nullptr;
  }
  return j;
}

nlohmann::ordered_json to_json(const HistogramTable& h) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < h.names.size(); ++g) groups[h.names[g]] = h.counts[g];
  return {{"edges", h.edges}, {"counts", groups}};
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json roc = nlohmann::ordered_json::array();
  for (const RocPoint& p : r.roc) roc.push_back(to_json(p));
  return {{"detector", r.detector},
          {"source", r.source},
          {"n", r.n},
          {"n_anomalous", r.n_anomalous},
          {"threshold", r.threshold},
          {"auroc", r.auroc},
          {"fpr95", r.points.fpr95.fpr},
          {"tpr5", r.points.tpr5.tpr},
          {"tpr1", r.points.tpr1.tpr},
          {"operating_points",
           {{"fpr95", to_json(r.points.fpr95)},
            {"tpr5", to_json(r.points.tpr5)},
            {"tpr1", to_json(r.points.tpr1)},
            {"youden", to_json(r.points.youden)}}},
          {"at_threshold", to_json(r.at_threshold)},
          {"at_youden", to_json(r.at_youden)},
          {"roc", roc},
          {"histogram", to_json(r.histogram)}};
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  auto out = open_out(path);
  out << "fpr,tpr,threshold\n";
  for (const RocPoint& p : curve) out << fmt(p.fpr) << ',' << fmt(p.tpr) << ',' << fmt(p.threshold) << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, const HistogramTable& h) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi";
  for (const auto& n : h.names) out << ',' << n;
  out << '\n';
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
    out << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1]);
    for (const auto& row : h.counts) out << ',' << row[b];
    out << '\n';
  }
}

void write_gnuplot_script(const std::filesystem::path& path,
                          std::span<const std::pair<std::string, std::string>> roc_csvs,
                          std::span<const std::pair<std::string, std::string>> histogram_csvs) {
  auto out = open_out(path);
  out << "set datafile separator ','\n"
         "set terminal pngcairo size 800,600\n";
  if (!roc_csvs.empty()) {
    out << "set output 'roc.png'\n"
           "set xlabel 'FPR'\nset ylabel 'TPR'\nset key bottom right\n"
           "set xrange [0:1]\nset yrange [0:1]\n"
           "plot x with lines dashtype 2 lc rgb 'gray' notitle";
    for (const auto& [title, file] : roc_csvs) {
      out << ", \\\n  '" << file << "' using 1:2 skip 1 with steps title '" << title << "'";
    }
    out << '\n';
    out << "set output 'roc_log.png'\nset logscale x\nset xrange [1e-3:1]\nplot ";
    bool first = true;
    for (const auto& [title, file] : roc_csvs) {
      out << (first ? "" : ", \\\n  ") << "'" << file << "' using 1:2 skip 1 with steps title '"
          << title << "'";
      first = false;
    }
    out << "\nunset logscale x\nset autoscale\n";
  }
  for (const auto& [title, file] : histogram_csvs) {
    out << "set output '" << title << ".png'\n"
           "set xlabel 'anomaly score'\nset ylabel 'count'\nset key top right\n"
           "set style fill transparent solid 0.4\n"
           "stats '" << file << "' skip 1 nooutput\n"
           "plot for [c=3:STATS_columns] '" << file
        << "' using (($1+$2)/2):c with boxes title columnhead(c)\n";
  }
}

}  // namespace jepamon::eval
