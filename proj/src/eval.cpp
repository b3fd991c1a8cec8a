// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <unordered_set>

namespace dynvox {
namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void accumulate(MetricSummary& s, const std::optional<double>& v, double& sum) {
  if (!v) return;
  sum += *v;
  s.min = s.min ? std::min(*s.min, *v) : *v;
  s.max = s.max ? std::max(*s.max, *v) : *v;
  ++s.defined;
}

void finish(MetricSummary& s, double sum) {
  if (s.defined > 0) s.mean = sum / static_cast<double>(s.defined);
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::string format_ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

FrameMetrics score_frame(std::span<const std::uint8_t> labels,
                         std::span<const std::uint8_t> ground_truth, int frame) {
  if (labels.size() != ground_truth.size()) {
    throw std::invalid_argument("score_frame: " + std::to_string(labels.size()) +
                                " labels vs " + std::to_string(ground_truth.size()) +
                                " ground-truth entries");
  }
  FrameMetrics m;
  m.frame = frame;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = labels[i] != 0;
    const bool g = ground_truth[i] != 0;
    if (p && g) ++m.tp;
    else if (p) ++m.fp;
    else if (g) ++m.fn;
    else ++m.tn;
  }
  m.iou = ratio(m.tp, m.tp + m.fp + m.fn);
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  return m;
}

Summary aggregate(std::span<const FrameMetrics> metrics, std::span<const int> selection) {
  const std::unordered_set<int> wanted(selection.begin(), selection.end());
  Summary s;
  double iou_sum = 0.0, precision_sum = 0.0, recall_sum = 0.0;
  for (const FrameMetrics& m : metrics) {
    if (!wanted.contains(m.frame)) continue;
    ++s.frames;
    accumulate(s.iou, m.iou, iou_sum);
    accumulate(s.precision, m.precision, precision_sum);
    accumulate(s.recall, m.recall, recall_sum);
    s.tp += m.tp;
    s.fp += m.fp;
    s.fn += m.fn;
    s.tn += m.tn;
  }
  if (s.frames == 0) throw std::invalid_argument("aggregate: no frames selected");
  finish(s.iou, iou_sum);
  finish(s.precision, precision_sum);
  finish(s.recall, recall_sum);
  s.pooled_iou = ratio(s.tp, s.tp + s.fp + s.fn);
  s.pooled_precision = ratio(s.tp, s.tp + s.fp);
  s.pooled_recall = ratio(s.tp, s.tp + s.fn);
  return s;
}

Summary aggregate(std::span<const FrameMetrics> metrics) {
  std::vector<int> all;
  all.reserve(metrics.size());
  for (const FrameMetrics& m : metrics) all.push_back(m.frame);
  return aggregate(metrics, all);
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_linear: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("fit_linear: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.n = x.size();
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - *fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (*fit.slope * x[i] + *fit.intercept);
    ss_res += r * r;
  }
  // A constant response is fitted exactly by a flat line.
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

ScalingFit fit_scaling(std::span<const StageTimings> timings) {
  if (timings.size() < 10) {
    throw std::invalid_argument("fit_scaling: need at least 10 frames, got " +
                                std::to_string(timings.size()));
  }
  std::vector<double> blocks, tsdf, free, update;
  for (const StageTimings& t : timings) {
    blocks.push_back(static_cast<double>(t.num_touched_blocks));
    tsdf.push_back(t.tsdf_ms);
    free.push_back(t.free_ms);
    update.push_back(t.tsdf_ms + t.free_ms);
  }
  ScalingFit fit;
  fit.tsdf_vs_blocks = fit_linear(blocks, tsdf);
  fit.free_vs_blocks = fit_linear(blocks, free);
  fit.map_update_vs_blocks = fit_linear(blocks, update);
  fit.tsdf_vs_free = fit_linear(free, tsdf);
  return fit;
}

Stat mean_std(std::span<const double> values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

void write_timings_csv(std::ostream& out, std::span<const StageTimings> timings) {
  out << kTimingsCsvHeader << '\n';
  for (const StageTimings& t : timings) {
    out << t.frame << ',' << t.num_points << ',' << t.num_seeds << ',' << t.num_touched_blocks
        << ',' << format_ms(t.pre_ms) << ',' << format_ms(t.clust_ms) << ','
        << format_ms(t.free_ms) << ',' << format_ms(t.tsdf_ms) << ',' << format_ms(t.total_ms())
        << '\n';
  }
}

void write_metrics_csv(std::ostream& out, std::span<const FrameMetrics> metrics) {
  out << kMetricsCsvHeader << '\n';
  for (const FrameMetrics& m : metrics) {
    out << m.frame << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << ','
        << format_optional(m.iou) << ',' << format_optional(m.precision) << ','
        << format_optional(m.recall) << '\n';
  }
}

}  // namespace dynvox
