// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Block-hashed voxel storage. Space is cut into cubic blocks of side^3 voxels;
// blocks are allocated on first touch and kept in a hash map keyed by their
// integer block coordinates. Each voxel carries the TSDF pair (distance,
// weight) and the temporal state used by the free-space model.

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "dynvox/config.hpp"

namespace dynvox {

/// Sentinel for "never occupied". Compares below every real frame index, so
/// `last_occupied < t - tau_w` holds for voxels that were never occupied.
inline constexpr std::int32_t kNeverOccupied = std::numeric_limits<std::int32_t>::min();

struct Voxel {
  float distance = 0.0f;
  float weight = 0.0f;
  std::int32_t last_occupied = kNeverOccupied;  // t_o
  std::int32_t occupied_duration = 0;           // t_d
  bool free = false;                            // f

  bool observed() const { return weight > 0.0f; }
};

/// Integer coordinates of a block.
struct BlockIndex {
  std::int32_t x = 0, y = 0, z = 0;
  auto operator<=>(const BlockIndex&) const = default;
};

/// Global integer coordinates of a voxel (not relative to its block).
struct VoxelIndex {
  std::int32_t x = 0, y = 0, z = 0;
  auto operator<=>(const VoxelIndex&) const = default;

  VoxelIndex operator+(const VoxelIndex& o) const { return {x + o.x, y + o.y, z + o.z}; }
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t h) {
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}
inline std::uint64_t pack21(std::int32_t x, std::int32_t y, std::int32_t z) {
  constexpr std::uint64_t kMask = (1ULL << 21) - 1;
  return ((static_cast<std::uint64_t>(x) & kMask) << 42) |
         ((static_cast<std::uint64_t>(y) & kMask) << 21) |
         (static_cast<std::uint64_t>(z) & kMask);
}
}  // namespace detail

struct BlockIndexHash {
  std::size_t operator()(const BlockIndex& b) const {
    return detail::mix64(detail::pack21(b.x, b.y, b.z));
  }
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const {
    return detail::mix64(detail::pack21(v.x, v.y, v.z));
  }
};

/// A voxel addressed through its block: the I and J maps of a point.
struct VoxelAddress {
  BlockIndex block;
  int offset = 0;  // linear index in [0, N_v), x fastest
  bool operator==(const VoxelAddress&) const = default;
};

struct Block {
  BlockIndex index;
  std::vector<Voxel> voxels;

  Block(BlockIndex index, int num_voxels) : index(index), voxels(num_voxels) {}
};

struct TsdfSample {
  double distance;
  double weight;
};

/// Weighted running average of one TSDF measurement into a voxel, clamped to
/// [-truncation, truncation]. With a zero prior weight the measurement simply
/// replaces the stored distance.
TsdfSample tsdf_update_voxel(double distance, double weight, double new_distance,
                             double new_weight, double truncation);

/// Offsets of the 6 face neighbors or the 26 cube neighbors (never the center).
std::span<const VoxelIndex> neighbor_offsets(Connectivity connectivity);

/// Floor division for possibly negative integers.
constexpr std::int32_t floor_div(std::int32_t a, std::int32_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

class VoxelMap {
 public:
  using BlockTable = std::unordered_map<BlockIndex, std::unique_ptr<Block>, BlockIndexHash>;

  explicit VoxelMap(MapConfig config);

  const MapConfig& config() const { return config_; }
  int block_side() const { return side_; }
  int voxels_per_block() const { return config_.voxels_per_block; }
  double voxel_size() const { return config_.voxel_size; }
  double block_size() const { return config_.voxel_size * side_; }

  // Addressing. Non-finite points yield nullopt. Points on a face belong to
  // the cell with the larger index.
  std::optional<VoxelIndex> point_to_global_voxel(const Eigen::Vector3d& p) const;
  std::optional<BlockIndex> point_to_block(const Eigen::Vector3d& p) const;
  std::optional<VoxelAddress> point_to_voxel(const Eigen::Vector3d& p) const;

  BlockIndex block_of(const VoxelIndex& v) const {
    return {floor_div(v.x, side_), floor_div(v.y, side_), floor_div(v.z, side_)};
  }
  VoxelAddress address_of(const VoxelIndex& v) const;
  VoxelIndex global_index(const VoxelAddress& a) const;
  VoxelIndex global_index(const BlockIndex& b, int offset) const {
    return global_index(VoxelAddress{b, offset});
  }
  int linear_offset(int lx, int ly, int lz) const { return lx + side_ * (ly + side_ * lz); }

  Eigen::Vector3d voxel_center(const VoxelIndex& v) const;
  Eigen::Vector3d block_origin(const BlockIndex& b) const;

  /// Neighbors under the configured connectivity.
  std::vector<VoxelIndex> neighbors(const VoxelIndex& v) const;
  std::span<const VoxelIndex> neighbor_offsets() const {
    return dynvox::neighbor_offsets(config_.connectivity);
  }

  Block* find_block(const BlockIndex& b);
  const Block* find_block(const BlockIndex& b) const;
  Block& allocate_block(const BlockIndex& b);

  Voxel* find_voxel(const VoxelIndex& v);
  const Voxel* find_voxel(const VoxelIndex& v) const;

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t num_voxels() const { return blocks_.size() * config_.voxels_per_block; }
  const BlockTable& blocks() const { return blocks_; }
  /// Allocated block indices in ascending order.
  std::vector<BlockIndex> sorted_block_indices() const;

  /// Index of the last frame whose update completed, -1 before the first.
  int frame_counter() const { return frame_counter_; }
  void set_frame_counter(int t) { frame_counter_ = t; }

 private:
  MapConfig config_;
  int side_;
  BlockTable blocks_;
  int frame_counter_ = -1;
};

/// The 3x3x3 blocks around a center block, for reading voxels just across a
/// block border. Local coordinates range over [-1, side].
template <typename MapT>
class BlockNeighborhood {
 public:
  using BlockPtr = std::conditional_t<std::is_const_v<MapT>, const Block*, Block*>;
  using VoxelPtr = std::conditional_t<std::is_const_v<MapT>, const Voxel*, Voxel*>;

  BlockNeighborhood(MapT& map, const BlockIndex& center) : side_(map.block_side()) {
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          blocks_[slot(dx, dy, dz)] =
              map.find_block(BlockIndex{center.x + dx, center.y + dy, center.z + dz});
        }
      }
    }
  }

  BlockPtr center() const { return blocks_[13]; }
  BlockPtr block(int dx, int dy, int dz) const { return blocks_[slot(dx, dy, dz)]; }

  /// nullptr when the containing block is not allocated.
  VoxelPtr at(int lx, int ly, int lz) const {
    const int dx = lx < 0 ? -1 : (lx >= side_ ? 1 : 0);
    const int dy = ly < 0 ? -1 : (ly >= side_ ? 1 : 0);
    const int dz = lz < 0 ? -1 : (lz >= side_ ? 1 : 0);
    BlockPtr b = blocks_[slot(dx, dy, dz)];
    if (b == nullptr) return nullptr;
    const int x = lx - dx * side_;
    const int y = ly - dy * side_;
    const int z = lz - dz * side_;
    return &b->voxels[x + side_ * (y + side_ * z)];
  }

 private:
  static int slot(int dx, int dy, int dz) { return (dx + 1) + 3 * ((dy + 1) + 3 * (dz + 1)); }

  int side_;
  std::array<BlockPtr, 27> blocks_{};
};

}  // namespace dynvox
