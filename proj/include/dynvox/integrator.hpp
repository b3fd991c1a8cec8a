// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dynvox/voxel_map.hpp"

namespace dynvox {

/// One sensor sweep: points in the sensor frame and the estimated
/// sensor-to-world pose.
struct Frame {
  int index = 0;
  std::vector<Eigen::Vector3f> points;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
};

/// Throws std::invalid_argument unless the pose rotation is orthonormal within
/// 1e-6 and the translation is finite.
void validate_pose(const Eigen::Isometry3d& pose);

/// A frame after transformation and voxel addressing.
struct IndexedCloud {
  int frame = 0;
  Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> world_points;
  std::vector<VoxelIndex> voxels;        // K(p_i); meaningless where !valid
  std::vector<std::uint8_t> valid;       // finite and within d_int
  std::vector<BlockIndex> touched_blocks;  // sorted, blocks crossed by any valid ray

  std::size_t size() const { return world_points.size(); }
  std::size_t num_valid() const;
};

struct PreprocessResult {
  IndexedCloud cloud;
  std::vector<VoxelIndex> seeds;  // sorted distinct K(p) with f == 1
};

/// Transforms the frame to world, addresses every point, collects the seed
/// voxels against the map's current free flags and the blocks that the
/// integration rays will cross. Read-only on the map.
PreprocessResult preprocess(const Frame& frame, const VoxelMap& map);

/// Fuses every valid ray of the cloud into the map: voxels within the
/// truncation band around the endpoint get their signed distance, voxels
/// further in front get +truncation. Allocates the touched blocks first.
/// Updates to one voxel are applied in point order.
void integrate(VoxelMap& map, const IndexedCloud& cloud);

/// A sensor ray, already scaled to voxel units, from the sensor origin to the
/// endpoint pushed back by the truncation distance.
struct RaySegment {
  Eigen::Vector3d origin;     // meters
  Eigen::Vector3d direction;  // unit
  double range = 0.0;         // origin to measured point [m]
  Eigen::Vector3d start_scaled;
  Eigen::Vector3d end_scaled;
};

RaySegment make_ray_segment(const Eigen::Vector3d& origin, const Eigen::Vector3d& point,
                            double voxel_size, double truncation);

namespace detail {

/// Grid walk of a segment in voxel units. The k-th step (0-based) along axis
/// a happens at parameter t0[a] + k * dt[a]; steps are taken in order of
/// (parameter, axis). Computing parameters from k instead of accumulating them
/// lets the block-level walk below reproduce the voxel walk exactly.
struct GridWalk {
  std::int32_t cell[3];
  std::int32_t step[3];
  std::int32_t count[3];  // total steps along each axis
  double t0[3];
  double dt[3];

  GridWalk(const Eigen::Vector3d& start, const Eigen::Vector3d& end) {
    const Eigen::Vector3d delta = end - start;
    for (int a = 0; a < 3; ++a) {
      cell[a] = static_cast<std::int32_t>(std::floor(start[a]));
      const auto last = static_cast<std::int32_t>(std::floor(end[a]));
      count[a] = std::abs(last - cell[a]);
      step[a] = last >= cell[a] ? 1 : -1;
      if (delta[a] != 0.0) {
        const double boundary = step[a] > 0 ? cell[a] + 1.0 : static_cast<double>(cell[a]);
        t0[a] = (boundary - start[a]) / delta[a];
        dt[a] = step[a] / delta[a];
      } else {
        t0[a] = std::numeric_limits<double>::infinity();
        dt[a] = 0.0;
      }
    }
  }

  double time(int axis, std::int32_t k) const { return t0[axis] + k * dt[axis]; }

  /// Parameters of the first step per axis, infinity for axes without steps.
  void init_times(double* t) const {
    for (int a = 0; a < 3; ++a) t[a] = count[a] > 0 ? t0[a] : std::numeric_limits<double>::infinity();
  }

  /// Axis of the earliest pending step, lowest axis on ties.
  static int next_axis(const double* t) {
    int axis = t[1] < t[0] ? 1 : 0;
    return t[2] < t[axis] ? 2 : axis;
  }
};

inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// floor(a / b) and the matching non-negative remainder, for b > 0.
inline void floor_divmod(std::int32_t a, std::int32_t b, std::int32_t& q, std::int32_t& r) {
  q = a / b;
  r = a % b;
  if (r < 0) {
    r += b;
    --q;
  }
}

}  // namespace detail

/// Visits every voxel whose cube the segment passes through, in order from
/// start to end. Coordinates are in voxel units. The visit count is exactly
/// the L1 distance between start and end cells plus one.
template <typename Visitor>
void traverse_voxels(const Eigen::Vector3d& start, const Eigen::Vector3d& end, Visitor&& visit) {
  detail::GridWalk w(start, end);
  std::int32_t done[3] = {0, 0, 0};
  double t_next[3];
  w.init_times(t_next);
  std::int32_t remaining = w.count[0] + w.count[1] + w.count[2];
  visit(VoxelIndex{w.cell[0], w.cell[1], w.cell[2]});
  for (;;) {
    if (remaining-- == 0) return;
    const int axis = w.next_axis(t_next);
    w.cell[axis] += w.step[axis];
    ++done[axis];
    t_next[axis] = done[axis] < w.count[axis] ? w.time(axis, done[axis]) : detail::kNever;
    visit(VoxelIndex{w.cell[0], w.cell[1], w.cell[2]});
  }
}

/// Same walk as traverse_voxels, additionally reporting each voxel's block
/// and its linear offset inside the block (x fastest). `visit(cell, block,
/// offset, entered_block)` where entered_block is true for the first voxel
/// of every new block along the walk.
template <typename Visitor>
void traverse_voxels_in_blocks(const Eigen::Vector3d& start, const Eigen::Vector3d& end,
                               std::int32_t side, Visitor&& visit) {
  detail::GridWalk w(start, end);
  std::int32_t block[3], local[3];
  for (int a = 0; a < 3; ++a) detail::floor_divmod(w.cell[a], side, block[a], local[a]);
  const std::int32_t stride[3] = {1, side, side * side};
  std::int32_t offset = local[0] + side * (local[1] + side * local[2]);
  std::int32_t done[3] = {0, 0, 0};
  double t_next[3];
  w.init_times(t_next);
  std::int32_t remaining = w.count[0] + w.count[1] + w.count[2];
  visit(VoxelIndex{w.cell[0], w.cell[1], w.cell[2]}, BlockIndex{block[0], block[1], block[2]},
        offset, true);
  for (;;) {
    if (remaining-- == 0) return;
    const int axis = w.next_axis(t_next);
    ++done[axis];
    t_next[axis] = done[axis] < w.count[axis] ? w.time(axis, done[axis]) : detail::kNever;
    const std::int32_t s = w.step[axis];
    w.cell[axis] += s;
    local[axis] += s;
    bool entered = false;
    if (local[axis] == side) {
      local[axis] = 0;
      ++block[axis];
      offset -= (side - 1) * stride[axis];
      entered = true;
    } else if (local[axis] < 0) {
      local[axis] = side - 1;
      --block[axis];
      offset += (side - 1) * stride[axis];
      entered = true;
    } else {
      offset += s * stride[axis];
    }
    visit(VoxelIndex{w.cell[0], w.cell[1], w.cell[2]}, BlockIndex{block[0], block[1], block[2]},
          offset, entered);
  }
}

/// Visits, in walk order, the blocks of edge `side` voxels that
/// traverse_voxels(start, end) passes through, each once per entry. Costs
/// O(blocks) instead of O(voxels).
template <typename Visitor>
void traverse_blocks(const Eigen::Vector3d& start, const Eigen::Vector3d& end, std::int32_t side,
                     Visitor&& visit) {
  detail::GridWalk w(start, end);
  std::int32_t block[3];
  std::int32_t next[3];  // 0-based index of the next block-changing step per axis
  for (int a = 0; a < 3; ++a) {
    std::int32_t local;
    detail::floor_divmod(w.cell[a], side, block[a], local);
    // 1-based step count until the walk leaves the current block.
    next[a] = (w.step[a] > 0 ? side - local : local + 1) - 1;
  }
  visit(BlockIndex{block[0], block[1], block[2]});
  for (;;) {
    int axis = -1;
    double best = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (next[a] >= w.count[a]) continue;
      const double t = w.time(a, next[a]);
      if (axis < 0 || t < best) {
        axis = a;
        best = t;
      }
    }
    if (axis < 0) return;
    block[axis] += w.step[axis];
    next[axis] += side;
    visit(BlockIndex{block[0], block[1], block[2]});
  }
}

}  // namespace dynvox
