// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "dynvox/voxel_map.hpp"

namespace dynvox {
namespace {

using nlohmann::json;
using Eigen::Vector3d;

constexpr double kDisplacementTolerance = 1e-9;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

Eigen::Quaterniond yaw_rotation(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vector3d::UnitZ()));
}

std::uint64_t frame_seed(std::uint64_t seed, int t) {
  return detail::mix64(seed ^ detail::mix64(static_cast<std::uint64_t>(t) + 0x9e3779b97f4a7c15ULL));
}

// JSON reading with field paths in every diagnostic.

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw SceneError(path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path + "." + key, "missing");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "expected a finite number");
  return d;
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

Vector3d vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected an array of 3 numbers");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path.empty() ? "scene" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      fail(path.empty() ? key : path + "." + key, "unknown field");
    }
  }
}

Keyframe keyframe_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"frame", "position", "yaw_deg", "rotation_wxyz"});
  Keyframe k;
  k.frame = integer(field(j, "frame", path), path + ".frame");
  k.position = vec3(field(j, "position", path), path + ".position");
  if (j.contains("yaw_deg") && j.contains("rotation_wxyz")) {
    fail(path, "give either yaw_deg or rotation_wxyz, not both");
  }
  if (j.contains("yaw_deg")) {
    k.rotation = yaw_rotation(deg_to_rad(number(j.at("yaw_deg"), path + ".yaw_deg")));
  } else if (j.contains("rotation_wxyz")) {
    const std::string p = path + ".rotation_wxyz";
    const json& q = j.at("rotation_wxyz");
    if (!q.is_array() || q.size() != 4) fail(p, "expected an array of 4 numbers");
    Eigen::Quaterniond r(number(q[0], p + "[0]"), number(q[1], p + "[1]"),
                         number(q[2], p + "[2]"), number(q[3], p + "[3]"));
    if (std::abs(r.norm() - 1.0) > 1e-6) fail(p, "quaternion must have unit norm");
    k.rotation = r.normalized();
  }
  return k;
}

std::vector<Keyframe> keyframes_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  std::vector<Keyframe> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    out.push_back(keyframe_from_json(j[i], p));
    if (i > 0 && out[i].frame <= out[i - 1].frame) fail(p + ".frame", "frames must increase");
  }
  return out;
}

Vector3d positive_size(const json& j, const std::string& path) {
  const Vector3d s = vec3(j, path);
  if ((s.array() <= 0.0).any()) fail(path, "extents must be positive");
  return s;
}

void statics_from_json(const json& j, SyntheticScene& scene) {
  if (!j.is_array()) fail("statics", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = "statics[" + std::to_string(i) + "]";
    const json& s = j[i];
    if (!s.is_object()) fail(p, "expected an object");
    const json& type = field(s, "type", p);
    if (!type.is_string()) fail(p + ".type", "expected a string");
    const std::string kind = type.get<std::string>();
    if (kind == "box") {
      check_keys(s, p, {"type", "center", "size", "yaw_deg"});
      StaticBox b;
      b.center = vec3(field(s, "center", p), p + ".center");
      b.size = positive_size(field(s, "size", p), p + ".size");
      if (s.contains("yaw_deg")) b.yaw = deg_to_rad(number(s.at("yaw_deg"), p + ".yaw_deg"));
      scene.boxes.push_back(b);
    } else if (kind == "plane") {
      check_keys(s, p, {"type", "normal", "offset"});
      StaticPlane pl;
      const Vector3d n = vec3(field(s, "normal", p), p + ".normal");
      if (n.norm() < 1e-9) fail(p + ".normal", "must be nonzero");
      pl.normal = n.normalized();
      pl.offset = number(field(s, "offset", p), p + ".offset") / n.norm();
      scene.planes.push_back(pl);
    } else if (kind == "room") {
      check_keys(s, p, {"type", "center", "size"});
      StaticRoom r;
      r.center = vec3(field(s, "center", p), p + ".center");
      r.size = positive_size(field(s, "size", p), p + ".size");
      scene.rooms.push_back(r);
    } else {
      fail(p + ".type", "expected \"box\", \"plane\" or \"room\"");
    }
  }
}

Mover mover_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"size", "keyframes", "active"});
  Mover m;
  m.size = positive_size(field(j, "size", path), path + ".size");
  m.keyframes = keyframes_from_json(field(j, "keyframes", path), path + ".keyframes");
  if (j.contains("active")) {
    const std::string p = path + ".active";
    const json& a = j.at("active");
    if (!a.is_array() || a.size() != 2) fail(p, "expected [first, last]");
    m.first_active = integer(a[0], p + "[0]");
    m.last_active = integer(a[1], p + "[1]");
    if (m.last_active < m.first_active) fail(p, "last frame precedes first");
  }
  return m;
}

SensorModel sensor_from_json(const json& j) {
  const std::string path = "sensor";
  check_keys(j, path, {"azimuth_rays", "elevation_rays", "vertical_fov_deg", "min_range",
                       "max_range", "noise_sigma"});
  SensorModel s;
  if (j.contains("azimuth_rays")) s.azimuth_rays = integer(j.at("azimuth_rays"), path + ".azimuth_rays");
  if (j.contains("elevation_rays")) s.elevation_rays = integer(j.at("elevation_rays"), path + ".elevation_rays");
  if (j.contains("vertical_fov_deg")) s.vertical_fov_deg = number(j.at("vertical_fov_deg"), path + ".vertical_fov_deg");
  if (j.contains("min_range")) s.min_range = number(j.at("min_range"), path + ".min_range");
  if (j.contains("max_range")) s.max_range = number(j.at("max_range"), path + ".max_range");
  if (j.contains("noise_sigma")) s.noise_sigma = number(j.at("noise_sigma"), path + ".noise_sigma");
  return s;
}

DriftModel drift_from_json(const json& j) {
  const std::string path = "drift";
  check_keys(j, path, {"mode", "rate", "rotation_rate", "seed"});
  DriftModel d;
  if (j.contains("mode")) {
    const json& m = j.at("mode");
    const std::string mode = m.is_string() ? m.get<std::string>() : "";
    if (mode == "none") d.mode = DriftMode::kNone;
    else if (mode == "linear") d.mode = DriftMode::kLinear;
    else if (mode == "random_walk") d.mode = DriftMode::kRandomWalk;
    else fail(path + ".mode", "expected \"none\", \"linear\" or \"random_walk\"");
  }
  if (j.contains("rate")) d.rate = number(j.at("rate"), path + ".rate");
  if (j.contains("rotation_rate")) d.rotation_rate = number(j.at("rotation_rate"), path + ".rotation_rate");
  if (j.contains("seed")) {
    if (!non_negative_integer(j.at("seed"))) fail(path + ".seed", "expected a non-negative integer");
    d.seed = j.at("seed").get<std::uint64_t>();
  }
  return d;
}

Vector3d random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    const Vector3d v(normal(rng), normal(rng), normal(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

struct Hit {
  double range = std::numeric_limits<double>::infinity();
  int mover = -1;  // index of the hit mover, -1 for static geometry
};

}  // namespace

Eigen::Isometry3d interpolate_keyframes(const std::vector<Keyframe>& keyframes, double t) {
  if (keyframes.empty()) return Eigen::Isometry3d::Identity();
  const auto pose_of = [](const Vector3d& p, const Eigen::Quaterniond& q) {
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = q.normalized().toRotationMatrix();
    T.translation() = p;
    return T;
  };
  if (t <= keyframes.front().frame) return pose_of(keyframes.front().position, keyframes.front().rotation);
  if (t >= keyframes.back().frame) return pose_of(keyframes.back().position, keyframes.back().rotation);
  const auto next = std::upper_bound(keyframes.begin(), keyframes.end(), t,
                                     [](double v, const Keyframe& k) { return v < k.frame; });
  const Keyframe& b = *next;
  const Keyframe& a = *(next - 1);
  const double s = (t - a.frame) / static_cast<double>(b.frame - a.frame);
  return pose_of(a.position + s * (b.position - a.position), a.rotation.slerp(s, b.rotation));
}

std::vector<Vector3d> SensorModel::ray_directions() const {
  std::vector<Vector3d> dirs;
  dirs.reserve(static_cast<std::size_t>(azimuth_rays) * elevation_rays);
  const double fov = deg_to_rad(vertical_fov_deg);
  for (int e = 0; e < elevation_rays; ++e) {
    const double elevation = -0.5 * fov + (e + 0.5) * fov / elevation_rays;
    for (int a = 0; a < azimuth_rays; ++a) {
      const double azimuth = 2.0 * std::numbers::pi * a / azimuth_rays;
      dirs.emplace_back(std::cos(elevation) * std::cos(azimuth),
                        std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    }
  }
  return dirs;
}

void SyntheticScene::validate() const {
  if (frames < 1) fail("frames", "must be >= 1");
  if (!(frame_rate > 0.0)) fail("frame_rate", "must be positive");
  if (sensor.azimuth_rays < 1) fail("sensor.azimuth_rays", "must be >= 1");
  if (sensor.elevation_rays < 1) fail("sensor.elevation_rays", "must be >= 1");
  if (!(sensor.vertical_fov_deg > 0.0 && sensor.vertical_fov_deg <= 180.0)) {
    fail("sensor.vertical_fov_deg", "must be in (0, 180]");
  }
  if (sensor.min_range < 0.0) fail("sensor.min_range", "must be >= 0");
  if (!(sensor.max_range > sensor.min_range)) fail("sensor.max_range", "must exceed min_range");
  if (sensor.noise_sigma < 0.0) fail("sensor.noise_sigma", "must be >= 0");
  if (trajectory.empty()) fail("trajectory", "needs at least one keyframe");
  if (drift.rate < 0.0) fail("drift.rate", "must be >= 0");
  if (drift.rotation_rate < 0.0) fail("drift.rotation_rate", "must be >= 0");
  for (std::size_t i = 0; i < movers.size(); ++i) {
    if (movers[i].keyframes.empty()) {
      fail("movers[" + std::to_string(i) + "].keyframes", "needs at least one keyframe");
    }
  }
}

std::vector<Eigen::Isometry3d> SyntheticScene::true_poses() const {
  std::vector<Eigen::Isometry3d> poses;
  poses.reserve(frames);
  for (int t = 0; t < frames; ++t) poses.push_back(true_pose(t));
  return poses;
}

SyntheticScene scene_from_json(const json& j) {
  check_keys(j, "", {"frames", "frame_rate", "seed", "sensor", "trajectory", "statics", "movers",
                     "drift", "config"});
  SyntheticScene scene;
  scene.frames = integer(field(j, "frames", "scene"), "frames");
  if (j.contains("frame_rate")) scene.frame_rate = number(j.at("frame_rate"), "frame_rate");
  if (j.contains("seed")) {
    if (!non_negative_integer(j.at("seed"))) fail("seed", "expected a non-negative integer");
    scene.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("sensor")) scene.sensor = sensor_from_json(j.at("sensor"));
  scene.trajectory = keyframes_from_json(field(j, "trajectory", "scene"), "trajectory");
  if (j.contains("statics")) statics_from_json(j.at("statics"), scene);
  if (j.contains("movers")) {
    const json& movers = j.at("movers");
    if (!movers.is_array()) fail("movers", "expected an array");
    for (std::size_t i = 0; i < movers.size(); ++i) {
      scene.movers.push_back(mover_from_json(movers[i], "movers[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("drift")) scene.drift = drift_from_json(j.at("drift"));
  if (j.contains("config")) {
    json config = j.at("config");
    if (!config.is_object()) fail("config", "expected an object");
    config["frame_rate"] = scene.frame_rate;
    try {
      scene.config = run_config_from_json(config);
    } catch (const ConfigError& e) {
      fail("config", e.what());
    }
  } else {
    scene.config.map.frame_rate = scene.frame_rate;
  }
  scene.validate();
  return scene;
}

SyntheticScene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(path + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SceneError(path + ": " + e.what());
  }
  return scene_from_json(j);
}

std::optional<double> intersect_box(const Vector3d& origin, const Vector3d& dir,
                                    const Vector3d& half_size) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (std::abs(origin[a]) > half_size[a]) return std::nullopt;
      continue;
    }
    double t0 = (-half_size[a] - origin[a]) / dir[a];
    double t1 = (half_size[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > 0.0) return t_near;
  if (t_far > 0.0) return t_far;
  return std::nullopt;
}

bool mover_point_displaced(const Mover& mover, const Vector3d& world_point, int t) {
  const Eigen::Isometry3d now_inv = mover.pose(t).inverse();
  const Vector3d local = now_inv * world_point;
  for (int earlier = t - 1; earlier >= 0; --earlier) {
    if ((mover.pose(earlier) * local - world_point).norm() > kDisplacementTolerance) return true;
  }
  return false;
}

RenderedFrame render_frame(const SyntheticScene& scene, int t) {
  const SensorModel& sensor = scene.sensor;
  const std::vector<Vector3d> dirs = sensor.ray_directions();
  const Eigen::Isometry3d pose = scene.true_pose(t);
  const Vector3d origin = pose.translation();
  const Eigen::Matrix3d R = pose.linear();

  // Noise is drawn sequentially so the frame does not depend on scheduling.
  std::vector<double> noise(dirs.size(), 0.0);
  if (sensor.noise_sigma > 0.0) {
    std::mt19937_64 rng(frame_seed(scene.seed, t));
    std::normal_distribution<double> normal(0.0, sensor.noise_sigma);
    for (double& n : noise) n = normal(rng);
  }

  struct MoverState {
    Eigen::Isometry3d pose_inv;
    Vector3d half;
    bool active;
  };
  std::vector<MoverState> movers;
  for (const Mover& m : scene.movers) {
    movers.push_back({m.pose(t).inverse(), 0.5 * m.size, m.active(t)});
  }
  struct BoxState {
    Eigen::Matrix3d rot_inv;
    Vector3d center, half;
  };
  std::vector<BoxState> boxes;
  for (const StaticBox& b : scene.boxes) {
    boxes.push_back({yaw_rotation(b.yaw).toRotationMatrix().transpose(), b.center, 0.5 * b.size});
  }

  std::vector<Hit> hits(dirs.size());
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, dirs.size(), 1024),
                    [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) {
      const Vector3d d = R * dirs[i];
      Hit best;
      const auto consider = [&](std::optional<double> range, int mover) {
        if (range && *range < best.range) best = {*range, mover};
      };
      for (const StaticPlane& p : scene.planes) {
        const double denom = p.normal.dot(d);
        if (denom == 0.0) continue;
        const double s = (p.offset - p.normal.dot(origin)) / denom;
        if (s > 0.0) consider(s, -1);
      }
      for (const StaticRoom& room : scene.rooms) {
        consider(intersect_box(origin - room.center, d, 0.5 * room.size), -1);
      }
      for (const BoxState& b : boxes) {
        consider(intersect_box(b.rot_inv * (origin - b.center), b.rot_inv * d, b.half), -1);
      }
      for (std::size_t m = 0; m < movers.size(); ++m) {
        if (!movers[m].active) continue;
        const Eigen::Isometry3d& inv = movers[m].pose_inv;
        consider(intersect_box(inv * origin, inv.linear() * d, movers[m].half), static_cast<int>(m));
      }
      hits[i] = best;
    }
  });

  RenderedFrame out;
  out.frame.index = t;
  out.frame.pose = pose;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Hit& h = hits[i];
    if (!(h.range >= sensor.min_range && h.range <= sensor.max_range)) continue;
    const double measured = h.range + noise[i];
    out.frame.points.push_back((dirs[i] * measured).cast<float>());
    std::uint8_t label = 0;
    if (h.mover >= 0) {
      const Vector3d surface = origin + h.range * (R * dirs[i]);
      label = mover_point_displaced(scene.movers[h.mover], surface, t) ? 1 : 0;
    }
    out.labels.push_back(label);
  }
  return out;
}

std::vector<Eigen::Isometry3d> apply_drift(const std::vector<Eigen::Isometry3d>& true_poses,
                                           const DriftModel& model, double frame_rate) {
  std::vector<Eigen::Isometry3d> out = true_poses;
  if (model.mode == DriftMode::kNone || true_poses.empty()) return out;

  std::mt19937_64 rng(model.seed);
  const double step = model.rate / frame_rate;
  const double yaw_step = model.rotation_rate / frame_rate;
  Vector3d direction = random_unit_vector(rng);
  Vector3d offset = Vector3d::Zero();
  double yaw = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  for (std::size_t t = 0; t < true_poses.size(); ++t) {
    if (model.mode == DriftMode::kLinear) {
      offset = direction * (step * static_cast<double>(t));
      yaw = yaw_step * static_cast<double>(t);
    } else if (t > 0) {
      // The heading wanders a little every frame; each step keeps its length.
      const Vector3d perturbed =
          direction + 0.3 * Vector3d(normal(rng), normal(rng), normal(rng));
      if (perturbed.norm() > 1e-9) direction = perturbed.normalized();
      offset += direction * step;
      yaw += yaw_step * uniform(rng);
    }
    out[t].linear() = yaw_rotation(yaw).toRotationMatrix() * true_poses[t].linear();
    out[t].translation() = true_poses[t].translation() + offset;
  }
  return out;
}

}  // namespace dynvox
