// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/integrator.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace dynvox {

namespace {

// Fixed chunking keeps the per-chunk outputs, and hence every merge below,
// independent of the number of worker threads.
constexpr std::size_t kChunkSize = 2048;

std::size_t num_chunks(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

template <typename Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  const std::size_t chunks = num_chunks(n);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, chunks, 1),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t c = r.begin(); c != r.end(); ++c) {
                        fn(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
                      }
                    });
}

struct Update {
  std::uint32_t slot;
  std::uint32_t offset;
  float distance;
};

}  // namespace

void validate_pose(const Eigen::Isometry3d& pose) {
  const Eigen::Matrix3d r = pose.linear();
  if (!r.allFinite() || !pose.translation().allFinite()) {
    throw std::invalid_argument("pose contains non-finite values");
  }
  if (!(r * r.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
      std::abs(r.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("pose rotation is not orthonormal");
  }
}

std::size_t IndexedCloud::num_valid() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

RaySegment make_ray_segment(const Eigen::Vector3d& origin, const Eigen::Vector3d& point,
                            double voxel_size, double truncation) {
  RaySegment seg;
  const double inv = 1.0 / voxel_size;
  seg.origin = origin;
  const Eigen::Vector3d diff = point - origin;
  seg.range = diff.norm();
  seg.direction = diff / seg.range;
  seg.start_scaled = origin * inv;
  seg.end_scaled = (point + seg.direction * truncation) * inv;
  return seg;
}

PreprocessResult preprocess(const Frame& frame, const VoxelMap& map) {
  validate_pose(frame.pose);
  const MapConfig& config = map.config();
  const std::size_t n = frame.points.size();

  PreprocessResult result;
  IndexedCloud& cloud = result.cloud;
  cloud.frame = frame.index;
  cloud.sensor_origin = frame.pose.translation();
  cloud.world_points.resize(n);
  cloud.voxels.resize(n);
  cloud.valid.assign(n, 0);

  const std::size_t chunks = num_chunks(n);
  std::vector<std::vector<VoxelIndex>> chunk_seeds(chunks);
  std::vector<std::vector<BlockIndex>> chunk_blocks(chunks);
  const int side = map.block_side();

  for_each_chunk(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<BlockIndex>& blocks = chunk_blocks[c];
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector3d p_sensor = frame.points[i].cast<double>();
      const Eigen::Vector3d p = frame.pose * p_sensor;
      cloud.world_points[i] = p;
      const auto voxel = map.point_to_global_voxel(p);
      if (!voxel) continue;
      cloud.voxels[i] = *voxel;
      const double range = p_sensor.norm();
      if (!(range > 0.0) || range > config.max_integration_distance) continue;
      cloud.valid[i] = 1;

      const Voxel* v = map.find_voxel(*voxel);
      if (v != nullptr && v->free) chunk_seeds[c].push_back(*voxel);

      const RaySegment seg =
          make_ray_segment(cloud.sensor_origin, p, config.voxel_size, config.truncation_distance);
      traverse_blocks(seg.start_scaled, seg.end_scaled, side,
                      [&](const BlockIndex& b) { blocks.push_back(b); });
    }
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  });

  for (auto& seeds : chunk_seeds) {
    result.seeds.insert(result.seeds.end(), seeds.begin(), seeds.end());
  }
  std::sort(result.seeds.begin(), result.seeds.end());
  result.seeds.erase(std::unique(result.seeds.begin(), result.seeds.end()), result.seeds.end());

  for (auto& blocks : chunk_blocks) {
    cloud.touched_blocks.insert(cloud.touched_blocks.end(), blocks.begin(), blocks.end());
  }
  std::sort(cloud.touched_blocks.begin(), cloud.touched_blocks.end());
  cloud.touched_blocks.erase(
      std::unique(cloud.touched_blocks.begin(), cloud.touched_blocks.end()),
      cloud.touched_blocks.end());
  return result;
}

void integrate(VoxelMap& map, const IndexedCloud& cloud) {
  const MapConfig& config = map.config();
  const std::size_t n = cloud.size();
  const int side = map.block_side();
  const double truncation = config.truncation_distance;
  const double voxel_size = config.voxel_size;

  // Serial allocation, then every block gets a dense slot.
  std::vector<Block*> slots;
  slots.reserve(cloud.touched_blocks.size());
  std::unordered_map<BlockIndex, std::uint32_t, BlockIndexHash> slot_of;
  slot_of.reserve(cloud.touched_blocks.size() * 2);
  for (const BlockIndex& b : cloud.touched_blocks) {
    slot_of.emplace(b, static_cast<std::uint32_t>(slots.size()));
    slots.push_back(&map.allocate_block(b));
  }

  // Ray traversal, data-parallel over points.
  const std::size_t chunks = num_chunks(n);
  std::vector<std::vector<Update>> chunk_updates(chunks);
  for_each_chunk(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<Update>& updates = chunk_updates[c];
    updates.reserve((end - begin) * 64);
    for (std::size_t i = begin; i < end; ++i) {
      if (!cloud.valid[i]) continue;
      const RaySegment seg =
          make_ray_segment(cloud.sensor_origin, cloud.world_points[i], voxel_size, truncation);
      const double origin_along = seg.origin.dot(seg.direction);
      const Eigen::Vector3d u_scaled = seg.direction * voxel_size;
      std::uint32_t slot = 0;
      traverse_voxels_in_blocks(
          seg.start_scaled, seg.end_scaled, side,
          [&](const VoxelIndex& cell, const BlockIndex& b, std::int32_t offset, bool entered) {
            if (entered) {
              const auto it = slot_of.find(b);
              if (it == slot_of.end()) {
                throw std::logic_error("integrate: ray touches a block missing from preprocess");
              }
              slot = it->second;
            }
            const double along = (cell.x + 0.5) * u_scaled.x() + (cell.y + 0.5) * u_scaled.y() +
                                 (cell.z + 0.5) * u_scaled.z() - origin_along;
            const double sdf = std::clamp(seg.range - along, -truncation, truncation);
            updates.push_back(
                {slot, static_cast<std::uint32_t>(offset), static_cast<float>(sdf)});
          });
    }
  });

  // Stable bucketing by block keeps point order inside every bucket.
  std::vector<std::size_t> begin_of(slots.size() + 1, 0);
  for (const auto& updates : chunk_updates) {
    for (const Update& u : updates) ++begin_of[u.slot + 1];
  }
  for (std::size_t s = 0; s < slots.size(); ++s) begin_of[s + 1] += begin_of[s];
  std::vector<std::pair<std::uint32_t, float>> bucketed(begin_of.back());
  {
    std::vector<std::size_t> cursor(begin_of.begin(), begin_of.end() - 1);
    for (auto& updates : chunk_updates) {
      for (const Update& u : updates) bucketed[cursor[u.slot]++] = {u.offset, u.distance};
      std::vector<Update>().swap(updates);
    }
  }

  const double weight = config.measurement_weight;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, slots.size()),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t s = r.begin(); s != r.end(); ++s) {
                        auto& voxels = slots[s]->voxels;
                        for (std::size_t k = begin_of[s]; k < begin_of[s + 1]; ++k) {
                          Voxel& v = voxels[bucketed[k].first];
                          const TsdfSample fused = tsdf_update_voxel(
                              v.distance, v.weight, bucketed[k].second, weight, truncation);
                          v.distance = static_cast<float>(fused.distance);
                          v.weight = static_cast<float>(fused.weight);
                        }
                      }
                    });
}

}  // namespace dynvox
