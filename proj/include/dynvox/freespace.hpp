// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Temporal voxel state: occupancy, consecutive occupancy duration, and the
// sticky high-confidence free flag with its drift reset.
//
// Per frame, after integration:
//   update_occupancy -> update_durations -> apply_drift_reset -> update_free_flags
//
// Occupancy and duration are refreshed in the "scope": the touched blocks plus
// every allocated block adjacent to one of them. Free flags are evaluated in
// the touched blocks only, so every neighbor they read was refreshed this
// frame.

#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dynvox/config.hpp"
#include "dynvox/integrator.hpp"
#include "dynvox/voxel_map.hpp"

namespace dynvox {

struct FreespaceParams {
  double occupancy_threshold = 0.3;  // tau_d
  int sparsity_frames = 2;           // tau_s
  int temporal_window = 5;           // tau_w
  std::optional<int> drift_reset_frames;  // tau_r, nullopt == infinity
  Connectivity connectivity = Connectivity::kTwentySix;
  bool tsdf_cue = true;
  bool occupancy_cue = true;
  bool spatial_margin = true;

  /// Effective parameters, ablation toggles applied.
  static FreespaceParams from_config(const MapConfig& config);
};

/// Voxels whose free flag was forced to zero by the drift reset this frame,
/// per block. Such voxels cannot be re-freed in the same frame.
class DriftResetMask {
 public:
  bool contains(const BlockIndex& block, int offset) const;
  bool empty() const { return masks_.empty(); }
  std::size_t count() const;

  std::unordered_map<BlockIndex, std::vector<std::uint8_t>, BlockIndexHash> masks_;
};

/// Touched blocks plus their allocated 26-neighbors, sorted.
std::vector<BlockIndex> occupancy_scope(const VoxelMap& map,
                                        std::span<const BlockIndex> touched);

/// t_o <- t where the fused distance is below tau_d (observed voxels only) or a
/// valid point of the current frame falls into the voxel.
void update_occupancy(VoxelMap& map, const IndexedCloud& cloud, int t,
                      const FreespaceParams& params, std::span<const BlockIndex> scope);

/// Consecutive occupancy with up to tau_s missed frames tolerated.
inline void update_duration(Voxel& voxel, int t, int sparsity_frames) {
  if (voxel.last_occupied != kNeverOccupied &&
      static_cast<long long>(voxel.last_occupied) >= static_cast<long long>(t) - sparsity_frames) {
    ++voxel.occupied_duration;
  } else {
    voxel.occupied_duration = 0;
  }
}

void update_durations(VoxelMap& map, int t, const FreespaceParams& params,
                      std::span<const BlockIndex> scope);

/// Clears f on every scope voxel occupied for more than tau_r frames and on
/// all of its neighbors, wherever they are allocated. No-op for tau_r = inf.
DriftResetMask apply_drift_reset(VoxelMap& map, const FreespaceParams& params,
                                 std::span<const BlockIndex> scope);

/// f <- max(f, f_hat) for the voxels of the touched blocks, except where the
/// drift reset fired this frame.
void update_free_flags(VoxelMap& map, int t, const FreespaceParams& params,
                       std::span<const BlockIndex> touched, const DriftResetMask& reset);

/// Whether the free test holds for one voxel, evaluated directly against the
/// map. Used for checks; update_free_flags computes the same thing blockwise.
bool free_condition(const VoxelMap& map, const VoxelIndex& v, int t,
                    const FreespaceParams& params);

/// Frames a static point needs to drift through one voxel at the given rate:
/// floor(nu * h / r_max), at least 1. Infinite (nullopt) for r_max = 0.
std::optional<int> compute_tau_r(double voxel_size, double frame_rate, double max_drift_rate);

/// Runs the four updates above in order for frame t.
void update_freespace(VoxelMap& map, const IndexedCloud& cloud, int t);

}  // namespace dynvox
