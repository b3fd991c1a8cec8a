// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/freespace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace dynvox {

namespace {

template <typename Fn>
void parallel_over(std::size_t n, Fn&& fn) {
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t i = r.begin(); i != r.end(); ++i) fn(i);
                    });
}

// A block plus a one-voxel halo, stored densely with x fastest.
class PaddedGrid {
 public:
  explicit PaddedGrid(int side) : side_(side), dim_(side + 2), cells_(dim_ * dim_ * dim_, 0) {}

  int dim() const { return dim_; }
  std::uint8_t& at(int px, int py, int pz) { return cells_[px + dim_ * (py + dim_ * pz)]; }
  std::uint8_t at(int px, int py, int pz) const { return cells_[px + dim_ * (py + dim_ * pz)]; }

  // Fills every cell from the voxel at local coordinate (p - 1); unallocated
  // voxels read as 0.
  template <typename Pred>
  void fill(const BlockNeighborhood<const VoxelMap>& hood, Pred&& pred) {
    for (int pz = 0; pz < dim_; ++pz) {
      for (int py = 0; py < dim_; ++py) {
        for (int px = 0; px < dim_; ++px) {
          const Voxel* v = hood.at(px - 1, py - 1, pz - 1);
          at(px, py, pz) = (v != nullptr && pred(*v)) ? 1 : 0;
        }
      }
    }
  }

  // Same, but from per-block byte masks instead of voxels.
  template <typename Lookup>
  void fill_from_masks(const BlockIndex& center, Lookup&& lookup) {
    const std::vector<std::uint8_t>* masks[27];
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          masks[(dx + 1) + 3 * ((dy + 1) + 3 * (dz + 1))] =
              lookup(BlockIndex{center.x + dx, center.y + dy, center.z + dz});
        }
      }
    }
    for (int pz = 0; pz < dim_; ++pz) {
      const int lz = pz - 1;
      const int dz = lz < 0 ? -1 : (lz >= side_ ? 1 : 0);
      for (int py = 0; py < dim_; ++py) {
        const int ly = py - 1;
        const int dy = ly < 0 ? -1 : (ly >= side_ ? 1 : 0);
        for (int px = 0; px < dim_; ++px) {
          const int lx = px - 1;
          const int dx = lx < 0 ? -1 : (lx >= side_ ? 1 : 0);
          const auto* mask = masks[(dx + 1) + 3 * ((dy + 1) + 3 * (dz + 1))];
          if (mask == nullptr) continue;
          const int x = lx - dx * side_;
          const int y = ly - dy * side_;
          const int z = lz - dz * side_;
          at(px, py, pz) = (*mask)[x + side_ * (y + side_ * z)];
        }
      }
    }
  }

 private:
  int side_;
  int dim_;
  std::vector<std::uint8_t> cells_;
};

// Combines each interior cell with its neighborhood: AND for erosion, OR for
// dilation. Output is side^3 in block linear order.
std::vector<std::uint8_t> morph(const PaddedGrid& in, int side, Connectivity connectivity,
                                bool erode) {
  const int n = in.dim();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(side) * side * side);
  const auto op = [erode](std::uint8_t a, std::uint8_t b) -> std::uint8_t {
    return erode ? (a & b) : (a | b);
  };

  if (connectivity == Connectivity::kSix) {
    for (int z = 1; z <= side; ++z) {
      for (int y = 1; y <= side; ++y) {
        for (int x = 1; x <= side; ++x) {
          std::uint8_t v = in.at(x, y, z);
          v = op(v, in.at(x - 1, y, z));
          v = op(v, in.at(x + 1, y, z));
          v = op(v, in.at(x, y - 1, z));
          v = op(v, in.at(x, y + 1, z));
          v = op(v, in.at(x, y, z - 1));
          v = op(v, in.at(x, y, z + 1));
          out[(x - 1) + side * ((y - 1) + side * (z - 1))] = v;
        }
      }
    }
    return out;
  }

  // The 3x3x3 cube is separable into three 3-tap passes.
  PaddedGrid px(side), py(side);
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 1; x <= side; ++x) {
        px.at(x, y, z) = op(op(in.at(x - 1, y, z), in.at(x, y, z)), in.at(x + 1, y, z));
      }
    }
  }
  for (int z = 0; z < n; ++z) {
    for (int y = 1; y <= side; ++y) {
      for (int x = 1; x <= side; ++x) {
        py.at(x, y, z) = op(op(px.at(x, y - 1, z), px.at(x, y, z)), px.at(x, y + 1, z));
      }
    }
  }
  for (int z = 1; z <= side; ++z) {
    for (int y = 1; y <= side; ++y) {
      for (int x = 1; x <= side; ++x) {
        out[(x - 1) + side * ((y - 1) + side * (z - 1))] =
            op(op(py.at(x, y, z - 1), py.at(x, y, z)), py.at(x, y, z + 1));
      }
    }
  }
  return out;
}

bool free_candidate(const Voxel& v, long long horizon) {
  return v.weight > 0.0f && static_cast<long long>(v.last_occupied) < horizon;
}

}  // namespace

FreespaceParams FreespaceParams::from_config(const MapConfig& config) {
  FreespaceParams p;
  p.occupancy_threshold = config.occupancy_threshold;
  p.sparsity_frames = config.effective_sparsity_frames();
  p.temporal_window = config.effective_temporal_window();
  p.drift_reset_frames = config.drift_reset_frames;
  p.connectivity = config.connectivity;
  p.tsdf_cue = config.ablation.tsdf_cue;
  p.occupancy_cue = config.ablation.occupancy_cue;
  p.spatial_margin = config.ablation.spatial_margin;
  return p;
}

bool DriftResetMask::contains(const BlockIndex& block, int offset) const {
  const auto it = masks_.find(block);
  return it != masks_.end() && it->second[offset] != 0;
}

std::size_t DriftResetMask::count() const {
  std::size_t n = 0;
  for (const auto& [b, m] : masks_) n += std::count(m.begin(), m.end(), std::uint8_t{1});
  return n;
}

std::vector<BlockIndex> occupancy_scope(const VoxelMap& map,
                                        std::span<const BlockIndex> touched) {
  std::unordered_set<BlockIndex, BlockIndexHash> seen;
  std::vector<BlockIndex> out;
  for (const BlockIndex& b : touched) {
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const BlockIndex n{b.x + dx, b.y + dy, b.z + dz};
          if (map.find_block(n) != nullptr && seen.insert(n).second) out.push_back(n);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void update_occupancy(VoxelMap& map, const IndexedCloud& cloud, int t,
                      const FreespaceParams& params, std::span<const BlockIndex> scope) {
  std::unordered_map<BlockIndex, std::vector<int>, BlockIndexHash> hits;
  if (params.occupancy_cue) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!cloud.valid[i]) continue;
      const VoxelAddress a = map.address_of(cloud.voxels[i]);
      hits[a.block].push_back(a.offset);
    }
  }
  const float threshold = static_cast<float>(params.occupancy_threshold);
  parallel_over(scope.size(), [&](std::size_t i) {
    Block* block = map.find_block(scope[i]);
    if (block == nullptr) return;
    if (params.tsdf_cue) {
      for (Voxel& v : block->voxels) {
        if (v.weight > 0.0f && v.distance < threshold) v.last_occupied = t;
      }
    }
    if (const auto it = hits.find(scope[i]); it != hits.end()) {
      for (int offset : it->second) block->voxels[offset].last_occupied = t;
    }
  });
}

void update_durations(VoxelMap& map, int t, const FreespaceParams& params,
                      std::span<const BlockIndex> scope) {
  parallel_over(scope.size(), [&](std::size_t i) {
    Block* block = map.find_block(scope[i]);
    if (block == nullptr) return;
    for (Voxel& v : block->voxels) update_duration(v, t, params.sparsity_frames);
  });
}

DriftResetMask apply_drift_reset(VoxelMap& map, const FreespaceParams& params,
                                 std::span<const BlockIndex> scope) {
  DriftResetMask result;
  if (!params.drift_reset_frames) return result;
  const int tau_r = *params.drift_reset_frames;
  const int side = map.block_side();

  std::vector<std::vector<std::uint8_t>> sources(scope.size());
  parallel_over(scope.size(), [&](std::size_t i) {
    const Block* block = map.find_block(scope[i]);
    if (block == nullptr) return;
    std::vector<std::uint8_t> src(block->voxels.size(), 0);
    bool any = false;
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (block->voxels[k].occupied_duration > tau_r) {
        src[k] = 1;
        any = true;
      }
    }
    if (any) sources[i] = std::move(src);
  });

  std::unordered_map<BlockIndex, const std::vector<std::uint8_t>*, BlockIndexHash> source_of;
  std::unordered_set<BlockIndex, BlockIndexHash> target_set;
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (sources[i].empty()) continue;
    source_of.emplace(scope[i], &sources[i]);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const BlockIndex n{scope[i].x + dx, scope[i].y + dy, scope[i].z + dz};
          if (map.find_block(n) != nullptr) target_set.insert(n);
        }
      }
    }
  }
  std::vector<BlockIndex> targets(target_set.begin(), target_set.end());
  std::sort(targets.begin(), targets.end());

  std::vector<std::vector<std::uint8_t>> masks(targets.size());
  parallel_over(targets.size(), [&](std::size_t i) {
    PaddedGrid grid(side);
    grid.fill_from_masks(targets[i], [&](const BlockIndex& b) -> const std::vector<std::uint8_t>* {
      const auto it = source_of.find(b);
      return it == source_of.end() ? nullptr : it->second;
    });
    std::vector<std::uint8_t> mask = morph(grid, side, params.connectivity, /*erode=*/false);
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) return;
    Block* block = map.find_block(targets[i]);
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k]) block->voxels[k].free = false;
    }
    masks[i] = std::move(mask);
  });

  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!masks[i].empty()) result.masks_.emplace(targets[i], std::move(masks[i]));
  }
  return result;
}

void update_free_flags(VoxelMap& map, int t, const FreespaceParams& params,
                       std::span<const BlockIndex> touched, const DriftResetMask& reset) {
  const int side = map.block_side();
  const long long horizon = static_cast<long long>(t) - params.temporal_window;
  const VoxelMap& view = map;

  parallel_over(touched.size(), [&](std::size_t i) {
    Block* block = map.find_block(touched[i]);
    if (block == nullptr) return;
    std::vector<std::uint8_t> free_now;
    if (params.spatial_margin) {
      PaddedGrid grid(side);
      grid.fill(BlockNeighborhood<const VoxelMap>(view, touched[i]),
                [horizon](const Voxel& v) { return free_candidate(v, horizon); });
      free_now = morph(grid, side, params.connectivity, /*erode=*/true);
    } else {
      free_now.resize(block->voxels.size());
      for (std::size_t k = 0; k < free_now.size(); ++k) {
        free_now[k] = free_candidate(block->voxels[k], horizon) ? 1 : 0;
      }
    }
    const auto it = reset.masks_.find(touched[i]);
    const std::vector<std::uint8_t>* mask = it == reset.masks_.end() ? nullptr : &it->second;
    for (std::size_t k = 0; k < free_now.size(); ++k) {
      if (mask != nullptr && (*mask)[k]) continue;
      if (free_now[k]) block->voxels[k].free = true;
    }
  });
}

bool free_condition(const VoxelMap& map, const VoxelIndex& v, int t,
                    const FreespaceParams& params) {
  const long long horizon = static_cast<long long>(t) - params.temporal_window;
  const Voxel* self = map.find_voxel(v);
  if (self == nullptr || !free_candidate(*self, horizon)) return false;
  if (!params.spatial_margin) return true;
  for (const VoxelIndex& o : neighbor_offsets(params.connectivity)) {
    const Voxel* n = map.find_voxel(v + o);
    if (n == nullptr || !free_candidate(*n, horizon)) return false;
  }
  return true;
}

std::optional<int> compute_tau_r(double voxel_size, double frame_rate, double max_drift_rate) {
  if (!(max_drift_rate >= 0.0)) throw std::invalid_argument("max_drift_rate must be >= 0");
  if (max_drift_rate == 0.0) return std::nullopt;
  const double frames = voxel_size * frame_rate / max_drift_rate;
  if (frames >= static_cast<double>(std::numeric_limits<int>::max())) return std::nullopt;
  return std::max(1, static_cast<int>(std::floor(frames * (1.0 + 1e-12))));
}

void update_freespace(VoxelMap& map, const IndexedCloud& cloud, int t) {
  const FreespaceParams params = FreespaceParams::from_config(map.config());
  const std::vector<BlockIndex> scope = occupancy_scope(map, cloud.touched_blocks);
  update_occupancy(map, cloud, t, params, scope);
  update_durations(map, t, params, scope);
  const DriftResetMask reset = apply_drift_reset(map, params, scope);
  update_free_flags(map, t, params, cloud.touched_blocks, reset);
}

}  // namespace dynvox
