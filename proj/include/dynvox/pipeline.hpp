// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-frame driver. Each frame runs, in order:
//   preprocess -> detect (previous flags) -> integrate -> free-space update
// and finally zeroes the weights of the voxels detected as dynamic so the next
// integration overwrites them.

#pragma once

#include "dynvox/config.hpp"
#include "dynvox/detector.hpp"
#include "dynvox/eval.hpp"
#include "dynvox/integrator.hpp"
#include "dynvox/voxel_map.hpp"

namespace dynvox {

struct FrameResult {
  DetectionResult detection;
  StageTimings timings;
};

class Pipeline {
 public:
  /// Validates the configuration; throws ConfigError.
  explicit Pipeline(const MapConfig& config);

  /// Processes one frame. Frame indices must be strictly increasing; throws
  /// std::invalid_argument otherwise or on an invalid pose.
  FrameResult process(const Frame& frame);

  const VoxelMap& map() const { return map_; }
  VoxelMap& map() { return map_; }

 private:
  VoxelMap map_;
};

}  // namespace dynvox
