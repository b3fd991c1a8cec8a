// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/voxel_map.hpp"

#include <algorithm>
#include <cmath>

namespace dynvox {

namespace {

constexpr std::array<VoxelIndex, 6> kFaceOffsets = {{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1},
}};

constexpr std::array<VoxelIndex, 26> make_cube_offsets() {
  std::array<VoxelIndex, 26> out{};
  int n = 0;
  for (int z = -1; z <= 1; ++z) {
    for (int y = -1; y <= 1; ++y) {
      for (int x = -1; x <= 1; ++x) {
        if (x == 0 && y == 0 && z == 0) continue;
        out[n++] = VoxelIndex{x, y, z};
      }
    }
  }
  return out;
}

constexpr std::array<VoxelIndex, 26> kCubeOffsets = make_cube_offsets();

}  // namespace

TsdfSample tsdf_update_voxel(double distance, double weight, double new_distance,
                             double new_weight, double truncation) {
  const double combined = weight + new_weight;
  double d = weight > 0.0 ? (distance * weight + new_distance * new_weight) / combined
                          : new_distance;
  d = std::clamp(d, -truncation, truncation);
  return {d, combined};
}

std::span<const VoxelIndex> neighbor_offsets(Connectivity connectivity) {
  if (connectivity == Connectivity::kSix) return kFaceOffsets;
  return kCubeOffsets;
}

VoxelMap::VoxelMap(MapConfig config) : config_(std::move(config)) {
  config_.validate();
  side_ = config_.block_side();
}

std::optional<VoxelIndex> VoxelMap::point_to_global_voxel(const Eigen::Vector3d& p) const {
  if (!p.allFinite()) return std::nullopt;
  const double inv = 1.0 / config_.voxel_size;
  const double fx = std::floor(p.x() * inv);
  const double fy = std::floor(p.y() * inv);
  const double fz = std::floor(p.z() * inv);
  constexpr double kLimit = static_cast<double>(1 << 20);
  if (std::abs(fx) >= kLimit || std::abs(fy) >= kLimit || std::abs(fz) >= kLimit) {
    return std::nullopt;
  }
  return VoxelIndex{static_cast<std::int32_t>(fx), static_cast<std::int32_t>(fy),
                    static_cast<std::int32_t>(fz)};
}

std::optional<BlockIndex> VoxelMap::point_to_block(const Eigen::Vector3d& p) const {
  const auto v = point_to_global_voxel(p);
  if (!v) return std::nullopt;
  return block_of(*v);
}

std::optional<VoxelAddress> VoxelMap::point_to_voxel(const Eigen::Vector3d& p) const {
  const auto v = point_to_global_voxel(p);
  if (!v) return std::nullopt;
  return address_of(*v);
}

VoxelAddress VoxelMap::address_of(const VoxelIndex& v) const {
  const BlockIndex b = block_of(v);
  return {b, linear_offset(v.x - b.x * side_, v.y - b.y * side_, v.z - b.z * side_)};
}

VoxelIndex VoxelMap::global_index(const VoxelAddress& a) const {
  const int lx = a.offset % side_;
  const int ly = (a.offset / side_) % side_;
  const int lz = a.offset / (side_ * side_);
  return {a.block.x * side_ + lx, a.block.y * side_ + ly, a.block.z * side_ + lz};
}

Eigen::Vector3d VoxelMap::voxel_center(const VoxelIndex& v) const {
  return (Eigen::Vector3d(v.x, v.y, v.z) + Eigen::Vector3d::Constant(0.5)) * config_.voxel_size;
}

Eigen::Vector3d VoxelMap::block_origin(const BlockIndex& b) const {
  return Eigen::Vector3d(b.x, b.y, b.z) * block_size();
}

std::vector<VoxelIndex> VoxelMap::neighbors(const VoxelIndex& v) const {
  const auto offsets = neighbor_offsets();
  std::vector<VoxelIndex> out;
  out.reserve(offsets.size());
  for (const auto& o : offsets) out.push_back(v + o);
  return out;
}

Block* VoxelMap::find_block(const BlockIndex& b) {
  const auto it = blocks_.find(b);
  return it == blocks_.end() ? nullptr : it->second.get();
}

const Block* VoxelMap::find_block(const BlockIndex& b) const {
  const auto it = blocks_.find(b);
  return it == blocks_.end() ? nullptr : it->second.get();
}

Block& VoxelMap::allocate_block(const BlockIndex& b) {
  auto& slot = blocks_[b];
  if (!slot) slot = std::make_unique<Block>(b, config_.voxels_per_block);
  return *slot;
}

Voxel* VoxelMap::find_voxel(const VoxelIndex& v) {
  const VoxelAddress a = address_of(v);
  Block* block = find_block(a.block);
  return block ? &block->voxels[a.offset] : nullptr;
}

const Voxel* VoxelMap::find_voxel(const VoxelIndex& v) const {
  const VoxelAddress a = address_of(v);
  const Block* block = find_block(a.block);
  return block ? &block->voxels[a.offset] : nullptr;
}

std::vector<BlockIndex> VoxelMap::sorted_block_indices() const {
  std::vector<BlockIndex> out;
  out.reserve(blocks_.size());
  for (const auto& [index, block] : blocks_) out.push_back(index);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dynvox
