// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dynvox/detector.hpp"
#include "support/oracles.hpp"

namespace dynvox {
namespace {

IndexedCloud cloud_at(const VoxelMap& map, const std::vector<VoxelIndex>& voxels) {
  IndexedCloud c;
  for (const auto& v : voxels) {
    c.world_points.push_back(map.voxel_center(v));
    c.voxels.push_back(v);
    c.valid.push_back(1);
  }
  return c;
}

VoxelMap free_map() {
  VoxelMap map(MapConfig{});
  map.allocate_block({0, 0, 0});
  return map;
}

TEST(CollectDynamicVoxels, SelfNeighborAndComplement) {
  VoxelMap map = free_map();
  map.find_voxel({5, 5, 5})->free = true;
  const auto got = collect_dynamic_voxels(cloud_at(map, {{5, 5, 5}, {6, 6, 6}, {8, 8, 8}}), map);
  EXPECT_EQ(got, (std::vector<VoxelIndex>{{5, 5, 5}, {6, 6, 6}}));
}

TEST(CollectDynamicVoxels, SixConnectivityIgnoresDiagonals) {
  MapConfig c;
  c.connectivity = Connectivity::kSix;
  VoxelMap map(c);
  map.allocate_block({0, 0, 0});
  map.find_voxel({5, 5, 5})->free = true;
  const auto got = collect_dynamic_voxels(cloud_at(map, {{6, 5, 5}, {6, 6, 5}}), map);
  EXPECT_EQ(got, (std::vector<VoxelIndex>{{6, 5, 5}}));
}

TEST(CollectDynamicVoxels, NeighborAcrossBlockAndUnallocated) {
  VoxelMap map(MapConfig{});
  map.allocate_block({-1, 0, 0});
  map.find_voxel({-1, 0, 0})->free = true;
  // (0,0,0) lies in an unallocated block; its free neighbor is allocated.
  const auto got = collect_dynamic_voxels(cloud_at(map, {{0, 0, 0}, {1, 0, 0}}), map);
  EXPECT_EQ(got, (std::vector<VoxelIndex>{{0, 0, 0}}));
}

TEST(CollectDynamicVoxels, MatchesDirectNeighborhoodCheck) {
  VoxelMap map(MapConfig{});
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> c(-20, 20);
  std::bernoulli_distribution coin(0.01);
  for (int bz = -2; bz < 2; ++bz)
    for (int by = -2; by < 2; ++by)
      for (int bx = -2; bx < 2; ++bx) map.allocate_block({bx, by, bz});
  for (const auto& [b, block] : map.blocks())
    for (auto& v : block->voxels) v.free = coin(rng);
  std::vector<VoxelIndex> pts;
  for (int i = 0; i < 3000; ++i) pts.push_back({c(rng), c(rng), c(rng)});
  IndexedCloud cloud = cloud_at(map, pts);
  cloud.valid[0] = 0;
  std::set<VoxelIndex> expected;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    bool dyn = map.find_voxel(pts[i])->free;
    for (const auto& n : map.neighbors(pts[i])) {
      const Voxel* v = map.find_voxel(n);
      dyn = dyn || (v && v->free);
    }
    if (dyn) expected.insert(pts[i]);
  }
  const auto got = collect_dynamic_voxels(cloud, map);
  EXPECT_EQ(std::set<VoxelIndex>(got.begin(), got.end()), expected);
  EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
}

std::vector<VoxelIndex> line(VoxelIndex start, int n) {
  std::vector<VoxelIndex> out;
  for (int i = 0; i < n; ++i) out.push_back({start.x + i, start.y, start.z});
  return out;
}

TEST(ClusterVoxels, SeparatedGroups) {
  auto a = line({0, 0, 0}, 20);
  auto b = line({0, 3, 0}, 25);
  std::vector<VoxelIndex> all = b;
  all.insert(all.end(), a.begin(), a.end());
  const auto clusters = cluster_voxels(all, Connectivity::kTwentySix, 20);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0], a);
  EXPECT_EQ(clusters[1], b);
}

TEST(ClusterVoxels, SizeFilterBoundary) {
  EXPECT_TRUE(cluster_voxels(line({0, 0, 0}, 19), Connectivity::kTwentySix, 20).empty());
  EXPECT_EQ(cluster_voxels(line({0, 0, 0}, 20), Connectivity::kTwentySix, 20).size(), 1u);
  EXPECT_EQ(cluster_voxels(line({0, 0, 0}, 1), Connectivity::kSix, 0).size(), 1u);
  EXPECT_TRUE(cluster_voxels({}, Connectivity::kSix, 0).empty());
}

TEST(ClusterVoxels, DiagonalsJoinOnlyUnderTwentySix) {
  const std::vector<VoxelIndex> v{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  EXPECT_EQ(cluster_voxels(v, Connectivity::kTwentySix, 1).size(), 1u);
  EXPECT_EQ(cluster_voxels(v, Connectivity::kSix, 1).size(), 3u);
}

TEST(ClusterVoxels, MatchesUnionFind) {
  std::mt19937_64 rng(500);
  std::uniform_int_distribution<int> c(0, 29), count(1, 500);
  for (int s = 0; s < 30; ++s) {
    std::vector<VoxelIndex> v;
    for (int i = count(rng); i > 0; --i) v.push_back({c(rng), c(rng), c(rng)});
    for (Connectivity conn : {Connectivity::kSix, Connectivity::kTwentySix}) {
      for (int min_size : {1, 3, 20}) {
        EXPECT_EQ(cluster_voxels(v, conn, min_size), oracle::components(v, conn, min_size));
      }
    }
  }
}

TEST(ClusterVoxels, RaisingMinSizeNeverAddsVoxels) {
  std::mt19937_64 rng(501);
  std::uniform_int_distribution<int> c(0, 15);
  std::vector<VoxelIndex> v;
  for (int i = 0; i < 700; ++i) v.push_back({c(rng), c(rng), c(rng)});
  std::size_t previous = SIZE_MAX;
  for (int m = 0; m < 60; m += 3) {
    std::size_t total = 0;
    for (const auto& cl : cluster_voxels(v, Connectivity::kSix, m)) total += cl.size();
    EXPECT_LE(total, previous);
    previous = total;
  }
}

TEST(LabelPoints, NoClustersNoLabels) {
  const VoxelMap map = free_map();
  const auto r = label_points(cloud_at(map, {{1, 1, 1}, {2, 2, 2}}), {});
  EXPECT_EQ(r.labels, (std::vector<std::uint8_t>{0, 0}));
  EXPECT_TRUE(r.dynamic_voxels.empty());
}

TEST(LabelPoints, LabelsExactlyClusterMembersAndSkipsInvalid) {
  const VoxelMap map = free_map();
  IndexedCloud c = cloud_at(map, {{1, 1, 1}, {2, 1, 1}, {9, 9, 9}, {1, 1, 1}});
  c.valid[3] = 0;
  const auto r = label_points(c, {{{1, 1, 1}, {2, 1, 1}}});
  EXPECT_EQ(r.labels, (std::vector<std::uint8_t>{1, 1, 0, 0}));
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].points, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.dynamic_voxels, (std::vector<VoxelIndex>{{1, 1, 1}, {2, 1, 1}}));
  EXPECT_EQ(r.num_dynamic_points(), 2u);
}

TEST(ResetDynamicWeights, OverwriteOnNextUpdate) {
  VoxelMap map = free_map();
  Voxel& flagged = *map.find_voxel({3, 3, 3});
  flagged.distance = 0.1f;
  flagged.weight = 9;
  Voxel& kept = *map.find_voxel({4, 4, 4});
  kept.distance = 0.1f;
  kept.weight = 9;
  Voxel& idle = *map.find_voxel({5, 5, 5});
  idle.weight = 3;
  const std::vector<VoxelIndex> reset{{3, 3, 3}, {5, 5, 5}, {100, 100, 100}};
  reset_dynamic_weights(map, reset);  // unallocated voxels are skipped
  EXPECT_EQ(flagged.weight, 0.0f);
  EXPECT_EQ(idle.weight, 0.0f);

  auto r = tsdf_update_voxel(flagged.distance, flagged.weight, 0.4, 1, 0.4);
  EXPECT_DOUBLE_EQ(r.distance, 0.4);
  EXPECT_EQ(r.weight, 1);
  r = tsdf_update_voxel(kept.distance, kept.weight, 0.4, 1, 0.4);
  EXPECT_NEAR(r.distance, 0.13, 1e-7);
  EXPECT_EQ(r.weight, 10);
}

TEST(Detect, SeedGrowsIntoCluster) {
  MapConfig c;
  c.min_cluster_size = 5;
  VoxelMap map(c);
  map.allocate_block({0, 0, 0});
  // Free shell around a 3x3x1 slab of occupied voxels.
  for (int z = 2; z <= 6; ++z)
    for (int y = 2; y <= 6; ++y)
      for (int x = 2; x <= 6; ++x) map.find_voxel({x, y, z})->free = true;
  std::vector<VoxelIndex> pts;
  for (int y = 3; y <= 5; ++y)
    for (int x = 3; x <= 5; ++x) pts.push_back({x, y, 4});
  pts.push_back({12, 12, 12});  // static clutter, no free neighbors
  const IndexedCloud cloud = cloud_at(map, pts);
  // Without a seed nothing is labeled.
  EXPECT_EQ(detect(cloud, {}, map).num_dynamic_points(), 0u);
  const std::vector<VoxelIndex> seed{{4, 4, 4}};
  const auto r = detect(cloud, seed, map);
  EXPECT_EQ(r.num_dynamic_points(), 9u);
  EXPECT_EQ(r.labels.back(), 0);
  c.min_cluster_size = 10;
  VoxelMap strict(c);
  strict.allocate_block({0, 0, 0});
  for (const auto& [b, block] : map.blocks()) strict.find_block(b)->voxels = block->voxels;
  EXPECT_EQ(detect(cloud, seed, strict).num_dynamic_points(), 0u);
}

TEST(Detect, KeepSeededDropsSeedlessClusters) {
  std::vector<std::vector<VoxelIndex>> clusters{{{0, 0, 0}, {1, 0, 0}}, {{5, 5, 5}}, {{9, 9, 9}, {9, 9, 8}}};
  const std::vector<VoxelIndex> seeds{{9, 9, 8}, {7, 7, 7}, {0, 0, 0}};
  const auto kept = keep_seeded(clusters, seeds);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], clusters[0]);
  EXPECT_EQ(kept[1], clusters[2]);
  EXPECT_TRUE(keep_seeded(clusters, {}).empty());
}

}  // namespace
}  // namespace dynvox
