// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace dynvox {

enum class Connectivity : int { kSix = 6, kTwentySix = 26 };

/// Thrown when a configuration violates its invariants. The message names the
/// offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Switches for disabling individual parts of the free-space model. Every
/// toggle defaults to "enabled", which is the full method.
struct AblationToggles {
  bool occupancy_cue = true;      // point-hit branch of the occupancy test
  bool tsdf_cue = true;           // distance branch of the occupancy test
  bool temporal_window = true;    // off: a voxel may turn free one frame after occupancy
  bool spatial_margin = true;     // off: free test looks at the voxel only
  bool sparsity_compensation = true;
  bool cluster_filter = true;

  bool operator==(const AblationToggles&) const = default;
};

struct MapConfig {
  double voxel_size = 0.2;                // nu [m]
  int voxels_per_block = 4096;            // N_v, must be a perfect cube
  double truncation_distance = 0.4;       // delta [m]
  double occupancy_threshold = 0.3;       // tau_d [m]
  int sparsity_frames = 2;                // tau_s
  int temporal_window = 5;                // tau_w
  std::optional<int> drift_reset_frames;  // tau_r, nullopt == infinity
  int min_cluster_size = 20;              // tau_c [voxels]
  double max_integration_distance = 20.0; // d_int [m], may be +inf
  double frame_rate = 10.0;               // h [Hz]
  double measurement_weight = 1.0;        // w_new
  Connectivity connectivity = Connectivity::kTwentySix;
  AblationToggles ablation;

  /// Defaults for a given voxel size: delta = 2 nu, tau_d = 1.5 nu.
  static MapConfig with_voxel_size(double voxel_size);

  /// Voxels along one block edge. Only valid after validate().
  int block_side() const;

  // Effective values after applying the ablation toggles.
  int effective_temporal_window() const { return ablation.temporal_window ? temporal_window : 0; }
  int effective_sparsity_frames() const { return ablation.sparsity_compensation ? sparsity_frames : 0; }
  int effective_min_cluster_size() const { return ablation.cluster_filter ? min_cluster_size : 0; }

  /// Throws ConfigError on the first violated invariant.
  void validate() const;

  bool operator==(const MapConfig&) const = default;
};

/// Everything a pipeline run needs beyond the map parameters.
struct RunConfig {
  MapConfig map;
  /// Expected maximum drift rate [m/s]. When set, it overrides
  /// map.drift_reset_frames through compute_tau_r().
  std::optional<double> max_drift_rate;
  int threads = 1;

  /// The map config with tau_r derived from max_drift_rate when given.
  MapConfig effective_map_config() const;
};

/// Integer cube root of n if n is a perfect cube, else nullopt.
std::optional<int> exact_cube_root(int n);

// JSON round trip. Missing fields take their defaults; delta and tau_d default
// to multiples of the voxel size actually given. "drift_reset_frames" accepts
// null or "inf" for infinity, "max_integration_distance" accepts "inf".
// Unknown keys are rejected so typos do not silently fall back to defaults.
MapConfig map_config_from_json(const nlohmann::json& j);
nlohmann::json map_config_to_json(const MapConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace dynvox
