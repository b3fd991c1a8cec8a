// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dynvox {

struct FrameMetrics {
  int frame = 0;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> iou;        // undefined when tp + fp + fn == 0
  std::optional<double> precision;  // undefined when tp + fp == 0
  std::optional<double> recall;     // undefined when tp + fn == 0
};

/// Compares predicted labels against ground truth (nonzero = dynamic).
/// Throws std::invalid_argument on a length mismatch.
FrameMetrics score_frame(std::span<const std::uint8_t> labels,
                         std::span<const std::uint8_t> ground_truth, int frame = 0);

struct MetricSummary {
  std::optional<double> mean, min, max;
  std::size_t defined = 0;  // frames that contributed
};

struct Summary {
  std::size_t frames = 0;
  MetricSummary iou, precision, recall;
  // Ratios of the counts pooled over all selected frames.
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> pooled_iou, pooled_precision, pooled_recall;
};

/// Mean/min/max of the defined values over the frames whose index is in
/// `selection`. Throws std::invalid_argument when nothing is selected.
Summary aggregate(std::span<const FrameMetrics> metrics, std::span<const int> selection);
/// Convenience overload selecting every frame. Throws on an empty list.
Summary aggregate(std::span<const FrameMetrics> metrics);

/// Wall time of the four stages of one frame, plus the set sizes they scale
/// with.
struct StageTimings {
  int frame = 0;
  double pre_ms = 0.0;
  double clust_ms = 0.0;
  double free_ms = 0.0;
  double tsdf_ms = 0.0;
  std::size_t num_points = 0;
  std::size_t num_seeds = 0;
  std::size_t num_touched_blocks = 0;

  double total_ms() const { return pre_ms + clust_ms + free_ms + tsdf_ms; }
};

struct LinearFit {
  std::optional<double> slope, intercept, r_squared;  // all unset when degenerate
  std::size_t n = 0;

  bool defined() const { return slope.has_value(); }
};

/// Least squares y = slope * x + intercept. Undefined when x is constant.
/// Throws std::invalid_argument on size mismatch or fewer than 2 samples.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

struct ScalingFit {
  LinearFit tsdf_vs_blocks;       // F_tsdf ~ |B|
  LinearFit free_vs_blocks;       // F_free ~ |B|
  LinearFit map_update_vs_blocks;  // F_tsdf + F_free ~ |B|
  LinearFit tsdf_vs_free;         // F_tsdf ~ F_free
};

/// Throws std::invalid_argument with fewer than 10 frames.
ScalingFit fit_scaling(std::span<const StageTimings> timings);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
Stat mean_std(std::span<const double> values);

// CSV export with a header row. Undefined metrics are left empty.
inline constexpr const char* kTimingsCsvHeader =
    "frame,num_points,num_seeds,num_touched_blocks,pre_ms,clust_ms,free_ms,tsdf_ms,total_ms";
inline constexpr const char* kMetricsCsvHeader = "frame,tp,fp,fn,tn,iou,precision,recall";

void write_timings_csv(std::ostream& out, std::span<const StageTimings> timings);
void write_metrics_csv(std::ostream& out, std::span<const FrameMetrics> metrics);

}  // namespace dynvox
