// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/detector.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace dynvox {

std::size_t DetectionResult::num_dynamic_points() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

std::vector<VoxelIndex> collect_dynamic_voxels(const IndexedCloud& cloud, const VoxelMap& map) {
  // Distinct occupied voxels, grouped by block so that each group shares one
  // neighborhood lookup.
  std::vector<VoxelAddress> occupied;
  occupied.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.valid[i]) occupied.push_back(map.address_of(cloud.voxels[i]));
  }
  const auto by_block = [](const VoxelAddress& a, const VoxelAddress& b) {
    return a.block != b.block ? a.block < b.block : a.offset < b.offset;
  };
  std::sort(occupied.begin(), occupied.end(), by_block);
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());

  std::vector<std::size_t> group_begin;
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    if (i == 0 || occupied[i].block != occupied[i - 1].block) group_begin.push_back(i);
  }
  group_begin.push_back(occupied.size());

  const int side = map.block_side();
  const auto offsets = map.neighbor_offsets();
  std::vector<std::uint8_t> is_dynamic(occupied.size(), 0);
  tbb::parallel_for(
      tbb::blocked_range<std::size_t>(0, group_begin.size() - 1, 1),
      [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t g = r.begin(); g != r.end(); ++g) {
          const BlockNeighborhood<const VoxelMap> hood(map, occupied[group_begin[g]].block);
          for (std::size_t i = group_begin[g]; i < group_begin[g + 1]; ++i) {
            const int lx = occupied[i].offset % side;
            const int ly = (occupied[i].offset / side) % side;
            const int lz = occupied[i].offset / (side * side);
            const Voxel* self = hood.at(lx, ly, lz);
            bool dynamic = self != nullptr && self->free;
            for (std::size_t k = 0; !dynamic && k < offsets.size(); ++k) {
              const Voxel* n = hood.at(lx + offsets[k].x, ly + offsets[k].y, lz + offsets[k].z);
              dynamic = n != nullptr && n->free;
            }
            is_dynamic[i] = dynamic ? 1 : 0;
          }
        }
      });

  std::vector<VoxelIndex> out;
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    if (is_dynamic[i]) out.push_back(map.global_index(occupied[i]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<VoxelIndex>> cluster_voxels(std::span<const VoxelIndex> voxels,
                                                    Connectivity connectivity, int min_size) {
  std::vector<VoxelIndex> sorted(voxels.begin(), voxels.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::unordered_set<VoxelIndex, VoxelIndexHash> unvisited(sorted.begin(), sorted.end());
  const auto offsets = neighbor_offsets(connectivity);
  std::vector<std::vector<VoxelIndex>> clusters;
  std::deque<VoxelIndex> frontier;

  // Seeding in ascending order makes each cluster's first seed its minimum,
  // so clusters come out ordered by minimal voxel.
  for (const VoxelIndex& seed : sorted) {
    if (unvisited.erase(seed) == 0) continue;
    std::vector<VoxelIndex> component{seed};
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const VoxelIndex v = frontier.front();
      frontier.pop_front();
      for (const VoxelIndex& o : offsets) {
        const VoxelIndex n = v + o;
        if (unvisited.erase(n) != 0) {
          component.push_back(n);
          frontier.push_back(n);
        }
      }
    }
    if (static_cast<int>(component.size()) < min_size) continue;
    std::sort(component.begin(), component.end());
    clusters.push_back(std::move(component));
  }
  return clusters;
}

DetectionResult label_points(const IndexedCloud& cloud,
                             std::vector<std::vector<VoxelIndex>> clusters) {
  DetectionResult result;
  result.frame = cloud.frame;
  result.labels.assign(cloud.size(), 0);

  std::unordered_map<VoxelIndex, std::size_t, VoxelIndexHash> cluster_of;
  result.clusters.resize(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const VoxelIndex& v : clusters[c]) cluster_of.emplace(v, c);
    result.dynamic_voxels.insert(result.dynamic_voxels.end(), clusters[c].begin(),
                                 clusters[c].end());
    result.clusters[c].voxels = std::move(clusters[c]);
  }
  std::sort(result.dynamic_voxels.begin(), result.dynamic_voxels.end());

  if (cluster_of.empty()) return result;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid[i]) continue;
    const auto it = cluster_of.find(cloud.voxels[i]);
    if (it == cluster_of.end()) continue;
    result.labels[i] = 1;
    result.clusters[it->second].points.push_back(i);
  }
  return result;
}

void reset_dynamic_weights(VoxelMap& map, std::span<const VoxelIndex> voxels) {
  for (const VoxelIndex& v : voxels) {
    if (Voxel* voxel = map.find_voxel(v)) voxel->weight = 0.0f;
  }
}

std::vector<std::vector<VoxelIndex>> keep_seeded(std::vector<std::vector<VoxelIndex>> clusters,
                                                 std::span<const VoxelIndex> seeds) {
  std::vector<VoxelIndex> sorted(seeds.begin(), seeds.end());
  std::sort(sorted.begin(), sorted.end());
  std::erase_if(clusters, [&](const std::vector<VoxelIndex>& c) {
    return std::none_of(c.begin(), c.end(), [&](const VoxelIndex& v) {
      return std::binary_search(sorted.begin(), sorted.end(), v);
    });
  });
  return clusters;
}

DetectionResult detect(const IndexedCloud& cloud, std::span<const VoxelIndex> seeds,
                       const VoxelMap& map) {
  std::vector<VoxelIndex> candidates = collect_dynamic_voxels(cloud, map);
  DetectionResult result = label_points(
      cloud, keep_seeded(cluster_voxels(candidates, map.config().connectivity,
                                        map.config().effective_min_cluster_size()),
                         seeds));
  result.seeds.assign(seeds.begin(), seeds.end());
  result.dynamic_candidates = std::move(candidates);
  return result;
}

}  // namespace dynvox
