// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/pipeline.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

#include "dynvox/freespace.hpp"

namespace dynvox {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

MapConfig validated(const MapConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Pipeline::Pipeline(const MapConfig& config) : map_(validated(config)) {}

FrameResult Pipeline::process(const Frame& frame) {
  if (frame.index <= map_.frame_counter()) {
    throw std::invalid_argument("frame index " + std::to_string(frame.index) +
                                " does not follow " + std::to_string(map_.frame_counter()));
  }
  validate_pose(frame.pose);

  FrameResult result;
  StageTimings& timings = result.timings;
  timings.frame = frame.index;

  auto start = Clock::now();
  PreprocessResult pre = preprocess(frame, map_);
  timings.pre_ms = elapsed_ms(start);

  start = Clock::now();
  result.detection = detect(pre.cloud, pre.seeds, map_);
  timings.clust_ms = elapsed_ms(start);

  start = Clock::now();
  integrate(map_, pre.cloud);
  timings.tsdf_ms = elapsed_ms(start);

  start = Clock::now();
  update_freespace(map_, pre.cloud, frame.index);
  reset_dynamic_weights(map_, result.detection.dynamic_voxels);
  timings.free_ms = elapsed_ms(start);

  timings.num_points = frame.points.size();
  timings.num_seeds = pre.seeds.size();
  timings.num_touched_blocks = pre.cloud.touched_blocks.size();
  map_.set_frame_counter(frame.index);
  return result;
}

}  // namespace dynvox
