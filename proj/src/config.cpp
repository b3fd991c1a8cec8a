// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/config.hpp"

#include <cmath>
#include <set>

#include "dynvox/freespace.hpp"

namespace dynvox {

using nlohmann::json;

MapConfig MapConfig::with_voxel_size(double voxel_size) {
  MapConfig config;
  config.voxel_size = voxel_size;
  config.truncation_distance = 2.0 * voxel_size;
  config.occupancy_threshold = 1.5 * voxel_size;
  return config;
}

std::optional<int> exact_cube_root(int n) {
  if (n <= 0) return std::nullopt;
  int root = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
  for (int candidate = std::max(1, root - 1); candidate <= root + 1; ++candidate) {
    if (candidate * candidate * candidate == n) return candidate;
  }
  return std::nullopt;
}

int MapConfig::block_side() const {
  const auto side = exact_cube_root(voxels_per_block);
  if (!side) throw ConfigError("voxels_per_block must be a perfect cube");
  return *side;
}

void MapConfig::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ConfigError("voxel_size must be positive and finite");
  }
  if (!exact_cube_root(voxels_per_block)) {
    throw ConfigError("voxels_per_block must be a perfect cube, got " +
                      std::to_string(voxels_per_block));
  }
  if (!(occupancy_threshold > 0.0)) throw ConfigError("occupancy_threshold must be positive");
  if (!(truncation_distance > occupancy_threshold) || !std::isfinite(truncation_distance)) {
    throw ConfigError("truncation_distance must exceed occupancy_threshold");
  }
  if (sparsity_frames < 0) throw ConfigError("sparsity_frames must be >= 0");
  if (temporal_window < 1) throw ConfigError("temporal_window must be >= 1");
  if (drift_reset_frames && *drift_reset_frames < 1) {
    throw ConfigError("drift_reset_frames must be >= 1 or infinite");
  }
  if (min_cluster_size < 0) throw ConfigError("min_cluster_size must be >= 0");
  if (!(max_integration_distance > 0.0)) {
    throw ConfigError("max_integration_distance must be positive");
  }
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
    throw ConfigError("frame_rate must be positive and finite");
  }
  if (!(measurement_weight > 0.0) || !std::isfinite(measurement_weight)) {
    throw ConfigError("measurement_weight must be positive and finite");
  }
}

MapConfig RunConfig::effective_map_config() const {
  MapConfig config = map;
  if (max_drift_rate) {
    config.drift_reset_frames =
        compute_tau_r(config.voxel_size, config.frame_rate, *max_drift_rate);
  }
  return config;
}

namespace {

double number_or_inf(const json& value, const std::string& key) {
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError(key + ": expected a number or \"inf\"");
  }
  if (!value.is_number()) throw ConfigError(key + ": expected a number");
  return value.get<double>();
}

int integer(const json& value, const std::string& key) {
  if (!value.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return value.get<int>();
}

bool boolean(const json& value, const std::string& key) {
  if (!value.is_boolean()) throw ConfigError(key + ": expected a boolean");
  return value.get<bool>();
}

AblationToggles ablation_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("ablation: expected an object");
  AblationToggles t;
  for (const auto& [key, value] : j.items()) {
    const std::string path = "ablation." + key;
    if (key == "occupancy_cue") t.occupancy_cue = boolean(value, path);
    else if (key == "tsdf_cue") t.tsdf_cue = boolean(value, path);
    else if (key == "temporal_window") t.temporal_window = boolean(value, path);
    else if (key == "spatial_margin") t.spatial_margin = boolean(value, path);
    else if (key == "sparsity_compensation") t.sparsity_compensation = boolean(value, path);
    else if (key == "cluster_filter") t.cluster_filter = boolean(value, path);
    else throw ConfigError("unknown key " + path);
  }
  return t;
}

}  // namespace

MapConfig map_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  double voxel_size = 0.2;
  if (j.contains("voxel_size")) voxel_size = number_or_inf(j.at("voxel_size"), "voxel_size");
  MapConfig c = MapConfig::with_voxel_size(voxel_size);

  for (const auto& [key, value] : j.items()) {
    if (key == "voxel_size") continue;
    if (key == "voxels_per_block") c.voxels_per_block = integer(value, key);
    else if (key == "truncation_distance") c.truncation_distance = number_or_inf(value, key);
    else if (key == "occupancy_threshold") c.occupancy_threshold = number_or_inf(value, key);
    else if (key == "sparsity_frames") c.sparsity_frames = integer(value, key);
    else if (key == "temporal_window") c.temporal_window = integer(value, key);
    else if (key == "drift_reset_frames") {
      if (value.is_null() || (value.is_string() && value.get<std::string>() == "inf")) {
        c.drift_reset_frames.reset();
      } else {
        c.drift_reset_frames = integer(value, key);
      }
    } else if (key == "min_cluster_size") c.min_cluster_size = integer(value, key);
    else if (key == "max_integration_distance") c.max_integration_distance = number_or_inf(value, key);
    else if (key == "frame_rate") c.frame_rate = number_or_inf(value, key);
    else if (key == "measurement_weight") c.measurement_weight = number_or_inf(value, key);
    else if (key == "connectivity") {
      const int n = integer(value, key);
      if (n == 6) c.connectivity = Connectivity::kSix;
      else if (n == 26) c.connectivity = Connectivity::kTwentySix;
      else throw ConfigError("connectivity: expected 6 or 26");
    } else if (key == "ablation") c.ablation = ablation_from_json(value);
    else throw ConfigError("unknown config key " + key);
  }
  c.validate();
  return c;
}

json map_config_to_json(const MapConfig& c) {
  json j;
  j["voxel_size"] = c.voxel_size;
  j["voxels_per_block"] = c.voxels_per_block;
  j["truncation_distance"] = c.truncation_distance;
  j["occupancy_threshold"] = c.occupancy_threshold;
  j["sparsity_frames"] = c.sparsity_frames;
  j["temporal_window"] = c.temporal_window;
  j["drift_reset_frames"] = c.drift_reset_frames ? json(*c.drift_reset_frames) : json("inf");
  j["min_cluster_size"] = c.min_cluster_size;
  j["max_integration_distance"] = std::isinf(c.max_integration_distance)
                                      ? json("inf")
                                      : json(c.max_integration_distance);
  j["frame_rate"] = c.frame_rate;
  j["measurement_weight"] = c.measurement_weight;
  j["connectivity"] = static_cast<int>(c.connectivity);
  j["ablation"] = {
      {"occupancy_cue", c.ablation.occupancy_cue},
      {"tsdf_cue", c.ablation.tsdf_cue},
      {"temporal_window", c.ablation.temporal_window},
      {"spatial_margin", c.ablation.spatial_margin},
      {"sparsity_compensation", c.ablation.sparsity_compensation},
      {"cluster_filter", c.ablation.cluster_filter},
  };
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  RunConfig rc;
  json map_part = j;
  if (j.contains("max_drift_rate")) {
    const auto& v = j.at("max_drift_rate");
    if (!v.is_null()) {
      rc.max_drift_rate = number_or_inf(v, "max_drift_rate");
      if (*rc.max_drift_rate < 0.0) throw ConfigError("max_drift_rate must be >= 0");
    }
    map_part.erase("max_drift_rate");
  }
  if (j.contains("threads")) {
    rc.threads = integer(j.at("threads"), "threads");
    if (rc.threads < 1) throw ConfigError("threads must be >= 1");
    map_part.erase("threads");
  }
  rc.map = map_config_from_json(map_part);
  return rc;
}

json run_config_to_json(const RunConfig& rc) {
  json j = map_config_to_json(rc.map);
  j["max_drift_rate"] = rc.max_drift_rate ? json(*rc.max_drift_rate) : json(nullptr);
  j["threads"] = rc.threads;
  return j;
}

}  // namespace dynvox
