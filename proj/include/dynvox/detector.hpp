// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynvox/integrator.hpp"
#include "dynvox/voxel_map.hpp"

namespace dynvox {

struct Cluster {
  std::vector<VoxelIndex> voxels;   // sorted
  std::vector<std::size_t> points;  // ascending point indices
};

struct DetectionResult {
  int frame = 0;
  std::vector<std::uint8_t> labels;  // 1 = dynamic, aligned with the input points
  std::vector<Cluster> clusters;     // survivors of the size filter, ordered by min voxel
  std::vector<VoxelIndex> seeds;          // occupied voxels that were already free
  std::vector<VoxelIndex> dynamic_candidates;  // V_dyn before clustering, sorted
  std::vector<VoxelIndex> dynamic_voxels;      // union of surviving clusters, sorted

  std::size_t num_dynamic_points() const;
};

/// Voxels holding a current point whose own free flag, or the flag of one of
/// its neighbors, is set. Reads the flags left by the previous frame.
std::vector<VoxelIndex> collect_dynamic_voxels(const IndexedCloud& cloud, const VoxelMap& map);

/// Connected components of `voxels` under `connectivity`, dropping those with
/// fewer than `min_size` voxels. Each component is sorted; components are
/// ordered by their smallest voxel.
std::vector<std::vector<VoxelIndex>> cluster_voxels(std::span<const VoxelIndex> voxels,
                                                    Connectivity connectivity, int min_size);

/// Drops the clusters that contain none of `seeds`. Growth happens only from
/// points that landed in free space.
std::vector<std::vector<VoxelIndex>> keep_seeded(std::vector<std::vector<VoxelIndex>> clusters,
                                                 std::span<const VoxelIndex> seeds);

/// Labels every valid point whose voxel lies in one of the clusters.
DetectionResult label_points(const IndexedCloud& cloud,
                             std::vector<std::vector<VoxelIndex>> clusters);

/// Zeroes the weight of the given voxels so the next integration overwrites
/// them instead of averaging.
void reset_dynamic_weights(VoxelMap& map, std::span<const VoxelIndex> voxels);

/// collect -> cluster -> keep seeded -> label with the map's configuration.
DetectionResult detect(const IndexedCloud& cloud, std::span<const VoxelIndex> seeds,
                       const VoxelMap& map);

}  // namespace dynvox
