// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "dynvox/scene_sim.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace dynvox {
namespace {

using nlohmann::json;

json small_scene() {
  return json::parse(R"({
    "frames": 12,
    "seed": 4,
    "sensor": {"azimuth_rays": 90, "elevation_rays": 16, "noise_sigma": 0},
    "trajectory": [{"frame": 0, "position": [0, 0, 1.5]}],
    "statics": [{"type": "room", "center": [0, 0, 1.5], "size": [10, 8, 3]}]
  })");
}

std::string scene_error(const json& j) {
  try {
    scene_from_json(j);
  } catch (const SceneError& e) {
    return e.what();
  }
  return "";
}

TEST(SceneJson, ErrorsNameTheField) {
  json j = small_scene();
  j["movers"] = json::parse(
      R"([{"size": [1, 1, 1], "keyframes": [{"frame": 0, "position": [0, 0, 0]},
                                            {"frame": 5, "position": [0, "x", 0]}]}])");
  EXPECT_EQ(scene_error(j).rfind("movers[0].keyframes[1].position[1]:", 0), 0u) << scene_error(j);

  j = small_scene();
  j["statics"][0]["colour"] = "red";
  EXPECT_EQ(scene_error(j).rfind("statics[0].colour: unknown field", 0), 0u) << scene_error(j);

  j = small_scene();
  j["statics"][0]["type"] = "sphere";
  EXPECT_EQ(scene_error(j).rfind("statics[0].type:", 0), 0u);

  j = small_scene();
  j.erase("trajectory");
  EXPECT_EQ(scene_error(j).rfind("scene.trajectory: missing", 0), 0u) << scene_error(j);

  j = small_scene();
  j["statics"][0]["size"] = {1, 0, 1};
  EXPECT_EQ(scene_error(j).rfind("statics[0].size:", 0), 0u);

  j = small_scene();
  j["config"] = {{"temporal_window", 0}};
  EXPECT_EQ(scene_error(j).rfind("config:", 0), 0u);

  j = small_scene();
  j["trajectory"] = json::parse(R"([{"frame": 3, "position": [0, 0, 0]},
                                    {"frame": 3, "position": [1, 0, 0]}])");
  EXPECT_EQ(scene_error(j).rfind("trajectory", 0), 0u) << scene_error(j);
}

TEST(SceneJson, ConfigTakesSceneFrameRate) {
  json j = small_scene();
  j["frame_rate"] = 20;
  j["config"] = {{"temporal_window", 3}};
  const SyntheticScene s = scene_from_json(j);
  EXPECT_EQ(s.config.map.frame_rate, 20.0);
  EXPECT_EQ(s.config.map.temporal_window, 3);
}

TEST(SceneJson, LoadReportsParseErrors) {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "bad.json");
    out << "{ \"frames\": ";
  }
  EXPECT_THROW(load_scene((dir / "bad.json").string()), SceneError);
  EXPECT_THROW(load_scene((dir / "none.json").string()), SceneError);
}

TEST(Keyframes, InterpolateAndHold) {
  std::vector<Keyframe> k(2);
  k[0].frame = 10;
  k[1].frame = 20;
  k[1].position = Eigen::Vector3d(2, 0, 0);
  k[1].rotation = Eigen::Quaterniond(Eigen::AngleAxisd(1.0, Eigen::Vector3d::UnitZ()));
  EXPECT_EQ(interpolate_keyframes(k, 0).translation(), Eigen::Vector3d::Zero());
  EXPECT_TRUE(interpolate_keyframes(k, 15).translation().isApprox(Eigen::Vector3d(1, 0, 0)));
  const Eigen::AngleAxisd half(interpolate_keyframes(k, 15).linear());
  EXPECT_NEAR(half.angle(), 0.5, 1e-12);
  EXPECT_TRUE(interpolate_keyframes(k, 99).translation().isApprox(Eigen::Vector3d(2, 0, 0)));
}

TEST(Sensor, RayDirections) {
  SensorModel s;
  s.azimuth_rays = 36;
  s.elevation_rays = 8;
  s.vertical_fov_deg = 40;
  const auto d = s.ray_directions();
  ASSERT_EQ(d.size(), 36u * 8u);
  for (const auto& v : d) {
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(std::asin(v.z())), 20.0 * std::numbers::pi / 180.0);
  }
}

TEST(IntersectBox, OutsideInsideAndMiss) {
  const Eigen::Vector3d half(1, 1, 1);
  EXPECT_DOUBLE_EQ(*intersect_box({-5, 0, 0}, {1, 0, 0}, half), 4.0);
  EXPECT_DOUBLE_EQ(*intersect_box({0, 0, 0}, {0, 1, 0}, half), 1.0);
  EXPECT_FALSE(intersect_box({-5, 3, 0}, {1, 0, 0}, half));
  EXPECT_FALSE(intersect_box({5, 0, 0}, {1, 0, 0}, half));
}

TEST(Render, RoomPointsLieOnWalls) {
  const SyntheticScene s = scene_from_json(small_scene());
  const RenderedFrame r = render_frame(s, 0);
  ASSERT_EQ(r.frame.points.size(), 90u * 16u);
  for (const auto& p : r.frame.points) {
    const Eigen::Vector3d w = r.frame.pose * p.cast<double>();
    const Eigen::Vector3d rel = (w - Eigen::Vector3d(0, 0, 1.5)).cwiseAbs();
    const double face = std::min({std::abs(rel.x() - 5), std::abs(rel.y() - 4), std::abs(rel.z() - 1.5)});
    EXPECT_LT(face, 1e-4);
  }
  EXPECT_TRUE(std::all_of(r.labels.begin(), r.labels.end(), [](auto l) { return l == 0; }));
}

TEST(Render, RangeGateDropsPoints) {
  json j = small_scene();
  j["sensor"]["max_range"] = 4.5;
  const RenderedFrame r = render_frame(scene_from_json(j), 0);
  EXPECT_LT(r.frame.points.size(), 90u * 16u);
  for (const auto& p : r.frame.points) EXPECT_LE(p.norm(), 4.5 + 1e-5);
}

TEST(Render, DeterministicAndSeeded) {
  json j = small_scene();
  j["sensor"]["noise_sigma"] = 0.05;
  const SyntheticScene s = scene_from_json(j);
  const RenderedFrame a = render_frame(s, 3), b = render_frame(s, 3);
  EXPECT_EQ(a.frame.points, b.frame.points);
  EXPECT_NE(a.frame.points, render_frame(s, 4).frame.points);
  j["seed"] = 5;
  EXPECT_NE(a.frame.points, render_frame(scene_from_json(j), 3).frame.points);
}

json mover_scene() {
  json j = small_scene();
  j["frames"] = 20;
  // Parked for frames 0..5, then slides +x at 0.5 m per frame.
  j["movers"] = json::parse(R"([{"size": [0.8, 0.8, 1.6],
      "keyframes": [{"frame": 5, "position": [-3, 2, 0.9]},
                    {"frame": 15, "position": [2, 2, 0.9]}]}])");
  return j;
}

TEST(Render, StationaryMoverIsStatic) {
  const SyntheticScene s = scene_from_json(mover_scene());
  for (int t = 0; t <= 5; ++t) {
    const RenderedFrame r = render_frame(s, t);
    EXPECT_EQ(std::count(r.labels.begin(), r.labels.end(), 1), 0) << "frame " << t;
  }
  const RenderedFrame moving = render_frame(s, 6);
  EXPECT_GT(std::count(moving.labels.begin(), moving.labels.end(), 1), 0);
}

TEST(Render, LabelsMatchSweptVolumeOracle) {
  const SyntheticScene s = scene_from_json(mover_scene());
  const Mover& m = s.movers[0];
  for (int t = 0; t < s.frames; ++t) {
    const RenderedFrame r = render_frame(s, t);
    const Eigen::Isometry3d pose_t = m.pose(t);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const Eigen::Vector3d w = r.frame.pose * r.frame.points[i].cast<double>();
      const bool on_mover = oracle::on_box_surface(pose_t, 0.5 * m.size, w, 1e-4);
      // Pure translation: every surface point moved iff the box moved at all.
      const bool moved = t > 5;
      EXPECT_EQ(r.labels[i] == 1, on_mover && moved) << "frame " << t << " point " << i;
    }
  }
}

TEST(Render, MoverOutsideActiveRangeIsInvisible) {
  json j = mover_scene();
  j["movers"][0]["active"] = {8, 10};
  const SyntheticScene s = scene_from_json(j);
  const SyntheticScene bare = scene_from_json(small_scene());
  EXPECT_EQ(render_frame(s, 7).frame.points, render_frame(bare, 7).frame.points);
  EXPECT_NE(render_frame(s, 9).frame.points, render_frame(bare, 9).frame.points);
  EXPECT_EQ(render_frame(s, 11).frame.points, render_frame(bare, 11).frame.points);
}

TEST(Render, RotatingMoverPointsOnAxisAreNotDisplaced) {
  Mover m;
  m.size = Eigen::Vector3d(1, 1, 2);
  m.keyframes.resize(2);
  m.keyframes[1].frame = 10;
  m.keyframes[1].rotation = Eigen::Quaterniond(Eigen::AngleAxisd(1.0, Eigen::Vector3d::UnitZ()));
  EXPECT_FALSE(mover_point_displaced(m, Eigen::Vector3d(0, 0, 1), 5));   // top center
  EXPECT_TRUE(mover_point_displaced(m, Eigen::Vector3d(0.5, 0, 0), 5));  // side face
  EXPECT_FALSE(mover_point_displaced(m, Eigen::Vector3d(0.5, 0, 0), 0));
}

TEST(Render, TranslatingTheWholeWorldKeepsSensorFrameOutput) {
  json j = mover_scene();
  j["sensor"]["noise_sigma"] = 0.02;
  const SyntheticScene a = scene_from_json(j);
  const double dx = 3.0, dy = -7.0;
  j["trajectory"][0]["position"] = {dx, dy, 1.5};
  j["statics"][0]["center"] = {dx, dy, 1.5};
  for (auto& k : j["movers"][0]["keyframes"]) {
    k["position"] = {k["position"][0].get<double>() + dx, k["position"][1].get<double>() + dy,
                     k["position"][2].get<double>()};
  }
  const SyntheticScene b = scene_from_json(j);
  for (int t : {0, 6, 12}) {
    const RenderedFrame ra = render_frame(a, t), rb = render_frame(b, t);
    ASSERT_EQ(ra.labels, rb.labels);
    ASSERT_EQ(ra.frame.points.size(), rb.frame.points.size());
    for (std::size_t i = 0; i < ra.frame.points.size(); ++i) {
      EXPECT_LT((ra.frame.points[i] - rb.frame.points[i]).norm(), 1e-4f);
    }
  }
}

std::vector<Eigen::Isometry3d> straight_line(int n) {
  std::vector<Eigen::Isometry3d> p(n, Eigen::Isometry3d::Identity());
  for (int t = 0; t < n; ++t) p[t].translation() = Eigen::Vector3d(0.1 * t, 0, 0);
  return p;
}

TEST(Drift, NoneIsIdentity) {
  const auto truth = straight_line(50);
  const auto est = apply_drift(truth, DriftModel{}, 10.0);
  for (int t = 0; t < 50; ++t) EXPECT_TRUE(est[t].isApprox(truth[t]));
}

TEST(Drift, LinearGrowsAtTheRate) {
  DriftModel d;
  d.mode = DriftMode::kLinear;
  d.rate = 0.04;
  d.seed = 3;
  const auto truth = straight_line(101);
  const auto est = apply_drift(truth, d, 10.0);
  EXPECT_NEAR((est[0].translation() - truth[0].translation()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((est[100].translation() - truth[100].translation()).norm(), 0.4, 1e-9);
  EXPECT_NEAR((est[50].translation() - truth[50].translation()).norm(), 0.2, 1e-9);
}

TEST(Drift, RandomWalkNeverExceedsTheRate) {
  DriftModel d;
  d.mode = DriftMode::kRandomWalk;
  d.rate = 0.1;
  d.rotation_rate = 0.01;
  d.seed = 9;
  const auto truth = straight_line(300);
  const auto est = apply_drift(truth, d, 10.0);
  double total = 0;
  for (int t = 1; t < 300; ++t) {
    const Eigen::Vector3d e0 = est[t - 1].translation() - truth[t - 1].translation();
    const Eigen::Vector3d e1 = est[t].translation() - truth[t].translation();
    EXPECT_LE((e1 - e0).norm(), 0.01 + 1e-12);
    total += (e1 - e0).norm();
    const double yaw = Eigen::AngleAxisd(est[t].linear() * est[t - 1].linear().transpose()).angle();
    EXPECT_LE(yaw, 0.001 + 1e-9);
  }
  EXPECT_GT(total, 0.0);
  // Same seed, same walk.
  EXPECT_TRUE(apply_drift(truth, d, 10.0)[299].isApprox(est[299]));
}

}  // namespace
}  // namespace dynvox
