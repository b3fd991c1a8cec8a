// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic LiDAR scenes: static primitives, keyframed box movers, a spinning
// sensor with range noise, and pose drift. Rendering yields points in the
// sensor frame together with exact per-point ground truth.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "dynvox/config.hpp"
#include "dynvox/integrator.hpp"

namespace dynvox {

/// Scene description errors. The message starts with the JSON path of the
/// offending field, e.g. "movers[0].keyframes[2].position".
class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solid box, optionally rotated about z. Rays hit its outside.
struct StaticBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;  // radians
};

/// Infinite plane {x | normal . x = offset}, normal of unit length.
struct StaticPlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
};

/// Axis-aligned hollow box seen from the inside: floor, ceiling and walls.
struct StaticRoom {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
};

struct Keyframe {
  int frame = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

/// Pose at frame t: positions interpolated linearly, rotations by slerp,
/// held constant before the first and after the last keyframe. Keyframes must
/// be sorted by strictly increasing frame.
Eigen::Isometry3d interpolate_keyframes(const std::vector<Keyframe>& keyframes, double t);

struct Mover {
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // box extents in its own frame
  std::vector<Keyframe> keyframes;                 // pose of the box center
  int first_active = 0;                            // visible in [first_active, last_active]
  int last_active = std::numeric_limits<int>::max();

  Eigen::Isometry3d pose(int t) const { return interpolate_keyframes(keyframes, t); }
  bool active(int t) const { return t >= first_active && t <= last_active; }
};

struct SensorModel {
  int azimuth_rays = 512;
  int elevation_rays = 64;
  double vertical_fov_deg = 90.0;  // symmetric about the horizon
  double min_range = 0.3;
  double max_range = 100.0;
  double noise_sigma = 0.02;  // Gaussian range noise [m]

  /// Unit ray directions in the sensor frame, elevation-major.
  std::vector<Eigen::Vector3d> ray_directions() const;
};

enum class DriftMode { kNone, kLinear, kRandomWalk };

struct DriftModel {
  DriftMode mode = DriftMode::kNone;
  double rate = 0.0;           // translational drift [m/s]
  double rotation_rate = 0.0;  // yaw drift [rad/s]
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  int frames = 1;
  double frame_rate = 10.0;
  std::uint64_t seed = 0;
  SensorModel sensor;
  std::vector<Keyframe> trajectory;  // true sensor poses, keyframed
  std::vector<StaticBox> boxes;
  std::vector<StaticPlane> planes;
  std::vector<StaticRoom> rooms;
  std::vector<Mover> movers;
  DriftModel drift;
  /// Pipeline settings stored with a synthesized sequence. frame_rate is
  /// always taken from the scene.
  RunConfig config;

  /// Throws SceneError on degenerate primitives or inconsistent fields.
  void validate() const;
  Eigen::Isometry3d true_pose(int t) const { return interpolate_keyframes(trajectory, t); }
  std::vector<Eigen::Isometry3d> true_poses() const;
};

SyntheticScene scene_from_json(const nlohmann::json& j);
SyntheticScene load_scene(const std::string& path);

struct RenderedFrame {
  Frame frame;                       // sensor-frame points, pose = true pose
  std::vector<std::uint8_t> labels;  // 1 = point on a surface that has moved
};

/// Ray-casts frame t. Deterministic in (scene, t).
RenderedFrame render_frame(const SyntheticScene& scene, int t);

/// Estimated poses: the true poses perturbed by the drift model.
std::vector<Eigen::Isometry3d> apply_drift(const std::vector<Eigen::Isometry3d>& true_poses,
                                           const DriftModel& model, double frame_rate);

/// Whether the surface point `world_point` of the mover, as seen at frame t,
/// sat at a different place in some earlier frame.
bool mover_point_displaced(const Mover& mover, const Eigen::Vector3d& world_point, int t);

/// Distance along the ray to the first crossing of an oriented box's surface,
/// for a ray given in the box frame. nullopt when missed.
std::optional<double> intersect_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                    const Eigen::Vector3d& half_size);

}  // namespace dynvox
