// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk sequences:
//
//   <dir>/config.json         run configuration
//   <dir>/poses.txt           "index tx ty tz qw qx qy qz" per line
//   <dir>/frames/NNNNNN.bin   points (or NNNNNN.txt, "x y z" per line)
//   <dir>/labels/NNNNNN.bin   optional ground truth, one byte per point
//
// Binary files are little-endian: 4-byte magic, u32 version (1), u32 count,
// then the records (3 x f32 per point, or 1 byte per label).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dynvox/config.hpp"
#include "dynvox/integrator.hpp"

namespace dynvox {

/// Malformed input. what() reads "<file>:<line>: <message>" when a line is
/// known, else "<file>: <message>".
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& file, int line, const std::string& message);
  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

std::string frame_file_name(int index, const std::string& extension = ".bin");

std::vector<Eigen::Vector3f> read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path, const std::vector<Eigen::Vector3f>& points);

std::vector<std::uint8_t> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

std::vector<Eigen::Isometry3d> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<Eigen::Isometry3d>& poses);

RunConfig read_run_config(const std::filesystem::path& path);
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

/// A sequence directory, validated on open. Frames are loaded lazily.
class Sequence {
 public:
  /// Throws DataError when the layout is inconsistent: missing or
  /// non-contiguous frame files, fewer poses than frames.
  explicit Sequence(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  int num_frames() const { return static_cast<int>(frame_files_.size()); }
  bool has_labels() const { return has_labels_; }
  bool has_labels(int i) const;
  const std::vector<Eigen::Isometry3d>& poses() const { return poses_; }
  /// The stored config, or defaults when config.json is absent.
  const RunConfig& config() const { return config_; }

  Frame frame(int i) const;
  /// Ground truth of frame i; throws DataError unless it holds exactly
  /// `num_points` entries.
  std::vector<std::uint8_t> labels(int i, std::size_t num_points) const;

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> frame_files_;
  std::vector<Eigen::Isometry3d> poses_;
  RunConfig config_;
  bool has_labels_ = false;
};

}  // namespace dynvox
