// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random free-space scenarios: the library map and the dense-grid oracle are
// fed identical distance/weight histories and point hits, then compared
// voxel by voxel after every frame.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dynvox/freespace.hpp"
#include "dynvox/integrator.hpp"
#include "dynvox/voxel_map.hpp"
#include "support/oracles.hpp"

namespace dynvox::testing {

struct ScenarioOutcome {
  int frames = 0;
  std::int64_t voxels_compared = 0;
  std::int64_t mismatches = 0;
  std::int64_t free_voxels_seen = 0;  // how much the run actually exercised
  std::int64_t resets_seen = 0;
  std::string first_mismatch;
};

inline MapConfig random_freespace_config(std::mt19937_64& rng) {
  MapConfig c;
  c.voxels_per_block = 64;  // 4^3, so a 20^3 grid spans several blocks
  std::uniform_int_distribution<int> tau_w(1, 6), tau_s(0, 3), tau_r(2, 12), coin(0, 9);
  c.temporal_window = tau_w(rng);
  c.sparsity_frames = tau_s(rng);
  if (coin(rng) < 6) c.drift_reset_frames = tau_r(rng);
  c.connectivity = coin(rng) < 5 ? Connectivity::kSix : Connectivity::kTwentySix;
  c.ablation.tsdf_cue = coin(rng) != 0;
  c.ablation.occupancy_cue = coin(rng) != 0;
  c.ablation.temporal_window = coin(rng) != 0;
  c.ablation.spatial_margin = coin(rng) != 0;
  c.ablation.sparsity_compensation = coin(rng) != 0;
  return c;
}

/// Runs `frames` frames on an n^3 grid whose first voxel sits at `origin`.
inline ScenarioOutcome run_freespace_scenario(const MapConfig& config, std::uint64_t seed,
                                              int n = 20, int frames = 50,
                                              VoxelIndex origin = {-8, -5, -12}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double delta = config.truncation_distance;

  VoxelMap map(config);
  oracle::FreespaceGrid grid(n, n, n);
  std::vector<BlockIndex> blocks;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const BlockIndex b = map.block_of(origin + VoxelIndex{x, y, z});
        if (!map.find_block(b)) {
          map.allocate_block(b);
          blocks.push_back(b);
        }
      }
  std::sort(blocks.begin(), blocks.end());

  // Blocks also cover voxels outside the n^3 grid; those stay unobserved in
  // both models, which is exactly how the oracle treats outside cells.
  ScenarioOutcome out;
  out.frames = frames;
  Eigen::Vector3d blob(unit(rng) * n, unit(rng) * n, unit(rng) * n);
  Eigen::Vector3d velocity(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
  const double radius = 2.0 + 2.0 * unit(rng);
  const double observe_p = 0.85 + 0.14 * unit(rng);

  for (int t = 0; t < frames; ++t) {
    blob += velocity;
    for (int a = 0; a < 3; ++a) {
      if (blob[a] < 0 || blob[a] > n) velocity[a] = -velocity[a];
    }
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(n) * n * n, 0);
    IndexedCloud cloud;
    cloud.frame = t;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const VoxelIndex g = origin + VoxelIndex{x, y, z};
          Voxel& v = *map.find_voxel(g);
          auto& c = grid.at(x, y, z);
          const double r = (Eigen::Vector3d(x, y, z) - blob).norm();
          if (unit(rng) < observe_p) {
            float d;
            if (r < radius) {
              d = static_cast<float>(-delta + unit(rng) * 1.5 * delta);
            } else {
              d = unit(rng) < 0.9 ? static_cast<float>(delta)
                                  : static_cast<float>((2.0 * unit(rng) - 1.0) * delta);
            }
            v.distance = c.d = d;
            v.weight = c.w = v.weight + 1.0f;
          }
          if (unit(rng) < 0.002) v.weight = c.w = 0.0f;  // like a dynamic reset
          const bool point = (std::abs(r - radius) < 0.8 && unit(rng) < 0.7) || unit(rng) < 0.002;
          if (point) {
            hit[x + n * (y + n * z)] = 1;
            cloud.world_points.push_back(map.voxel_center(g));
            cloud.voxels.push_back(g);
            cloud.valid.push_back(1);
          } else if (unit(rng) < 0.002) {
            // Invalid points must not count as hits.
            cloud.world_points.push_back(map.voxel_center(g));
            cloud.voxels.push_back(g);
            cloud.valid.push_back(0);
          }
        }
    cloud.touched_blocks = blocks;

    update_freespace(map, cloud, t);
    grid.step(t, hit, config);

    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const Voxel& v = *map.find_voxel(origin + VoxelIndex{x, y, z});
          const auto& c = grid.at(x, y, z);
          const std::int64_t t_o =
              v.last_occupied == kNeverOccupied ? std::numeric_limits<std::int64_t>::min()
                                                : v.last_occupied;
          ++out.voxels_compared;
          out.free_voxels_seen += c.f ? 1 : 0;
          if (config.drift_reset_frames && c.t_d > *config.drift_reset_frames) ++out.resets_seen;
          if (v.free != c.f || t_o != c.t_o || v.occupied_duration != c.t_d) {
            if (out.mismatches++ == 0) {
              std::ostringstream s;
              s << "frame " << t << " voxel (" << x << "," << y << "," << z << "): f " << v.free
                << "/" << c.f << " t_o " << t_o << "/" << c.t_o << " t_d "
                << v.occupied_duration << "/" << c.t_d;
              out.first_mismatch = s.str();
            }
          }
        }
  }
  return out;
}

}  // namespace dynvox::testing
