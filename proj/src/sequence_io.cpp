// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynvox/sequence_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dynvox {
namespace fs = std::filesystem;
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary frame files are read by reinterpreting little-endian data");

constexpr std::uint32_t kVersion = 1;
constexpr std::array<char, 4> kPointsMagic = {'D', 'V', 'P', 'T'};
constexpr std::array<char, 4> kLabelsMagic = {'D', 'V', 'L', 'B'};

std::string describe(const fs::path& p) { return p.string(); }

void write_header(std::ofstream& out, const std::array<char, 4>& magic, std::uint32_t count) {
  out.write(magic.data(), 4);
  out.write(reinterpret_cast<const char*>(&kVersion), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
}

// Returns the record count after checking magic, version and file size.
std::uint32_t read_header(std::ifstream& in, const fs::path& path,
                          const std::array<char, 4>& magic, std::size_t record_size) {
  std::array<char, 4> got{};
  std::uint32_t version = 0, count = 0;
  in.read(got.data(), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in) throw DataError(describe(path), 0, "truncated header");
  if (got != magic) throw DataError(describe(path), 0, "bad magic");
  if (version != kVersion) {
    throw DataError(describe(path), 0, "unsupported version " + std::to_string(version));
  }
  const auto size = fs::file_size(path);
  const auto expected = 12 + static_cast<std::uintmax_t>(count) * record_size;
  if (size != expected) {
    throw DataError(describe(path), 0,
                    "header announces " + std::to_string(count) + " records (" +
                        std::to_string(expected) + " bytes) but file has " +
                        std::to_string(size) + " bytes");
  }
  return count;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(describe(path), 0, "cannot open for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError(describe(path), 0, "cannot open");
  return in;
}

std::vector<Eigen::Vector3f> read_points_text(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<Eigen::Vector3f> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    float x, y, z;
    std::string extra;
    if (!(ss >> x >> y >> z) || (ss >> extra)) {
      throw DataError(describe(path), line_no, "expected \"x y z\"");
    }
    points.emplace_back(x, y, z);
  }
  return points;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DataError::DataError(const std::string& file, int line, const std::string& message)
    : std::runtime_error(line > 0 ? file + ":" + std::to_string(line) + ": " + message
                                  : file + ": " + message),
      file_(file),
      line_(line) {}

std::string frame_file_name(int index, const std::string& extension) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf + extension;
}

std::vector<Eigen::Vector3f> read_points(const fs::path& path) {
  if (path.extension() == ".txt") return read_points_text(path);
  std::ifstream in = open_in(path, std::ios::binary);
  const std::uint32_t count = read_header(in, path, kPointsMagic, 12);
  std::vector<float> raw(static_cast<std::size_t>(count) * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!in) throw DataError(describe(path), 0, "truncated point records");
  std::vector<Eigen::Vector3f> points(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    points[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  }
  return points;
}

void write_points(const fs::path& path, const std::vector<Eigen::Vector3f>& points) {
  std::ofstream out = open_out(path);
  write_header(out, kPointsMagic, static_cast<std::uint32_t>(points.size()));
  for (const Eigen::Vector3f& p : points) out.write(reinterpret_cast<const char*>(p.data()), 12);
  if (!out) throw DataError(describe(path), 0, "write failed");
}

std::vector<std::uint8_t> read_labels(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  const std::uint32_t count = read_header(in, path, kLabelsMagic, 1);
  std::vector<std::uint8_t> labels(count);
  in.read(reinterpret_cast<char*>(labels.data()), count);
  if (!in) throw DataError(describe(path), 0, "truncated label records");
  for (std::uint32_t i = 0; i < count; ++i) {
    if (labels[i] > 1) {
      throw DataError(describe(path), 0, "label " + std::to_string(i) + " is neither 0 nor 1");
    }
  }
  return labels;
}

void write_labels(const fs::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out = open_out(path);
  write_header(out, kLabelsMagic, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!out) throw DataError(describe(path), 0, "write failed");
}

std::vector<Eigen::Isometry3d> read_poses(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<Eigen::Isometry3d> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    long long index;
    double tx, ty, tz, qw, qx, qy, qz;
    std::string extra;
    if (!(ss >> index >> tx >> ty >> tz >> qw >> qx >> qy >> qz) || (ss >> extra)) {
      throw DataError(describe(path), line_no, "expected \"index tx ty tz qw qx qy qz\"");
    }
    if (index != static_cast<long long>(poses.size())) {
      throw DataError(describe(path), line_no,
                      "expected index " + std::to_string(poses.size()) + ", got " +
                          std::to_string(index));
    }
    const Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!std::isfinite(q.norm()) || std::abs(q.norm() - 1.0) > 1e-6) {
      throw DataError(describe(path), line_no, "quaternion is not unit length");
    }
    if (!std::isfinite(tx) || !std::isfinite(ty) || !std::isfinite(tz)) {
      throw DataError(describe(path), line_no, "non-finite translation");
    }
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    pose.linear() = q.normalized().toRotationMatrix();
    pose.translation() = Eigen::Vector3d(tx, ty, tz);
    poses.push_back(pose);
  }
  return poses;
}

void write_poses(const fs::path& path, const std::vector<Eigen::Isometry3d>& poses) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Vector3d t = poses[i].translation();
    Eigen::Quaterniond q(poses[i].linear());
    q.normalize();
    out << i << ' ' << format_double(t.x()) << ' ' << format_double(t.y()) << ' '
        << format_double(t.z()) << ' ' << format_double(q.w()) << ' ' << format_double(q.x())
        << ' ' << format_double(q.y()) << ' ' << format_double(q.z()) << '\n';
  }
  if (!out) throw DataError(describe(path), 0, "write failed");
}

RunConfig read_run_config(const fs::path& path) {
  std::ifstream in = open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(describe(path), 0, e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ConfigError& e) {
    throw DataError(describe(path), 0, e.what());
  }
}

void write_run_config(const fs::path& path, const RunConfig& config) {
  std::ofstream out = open_out(path);
  out << run_config_to_json(config).dump(2) << '\n';
  if (!out) throw DataError(describe(path), 0, "write failed");
}

Sequence::Sequence(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw DataError(describe(dir_), 0, "not a directory");
  const fs::path frames = dir_ / "frames";
  if (!fs::is_directory(frames)) throw DataError(describe(frames), 0, "missing frames directory");

  std::vector<std::pair<int, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(frames)) {
    const fs::path& p = entry.path();
    if (p.extension() != ".bin" && p.extension() != ".txt") continue;
    const std::string stem = p.stem().string();
    if (stem.empty() || stem.find_first_not_of("0123456789") != std::string::npos) {
      throw DataError(describe(p), 0, "frame file name must be a number");
    }
    found.emplace_back(std::stoi(stem), p);
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i)) {
      throw DataError(describe(found[i].second), 0,
                      "frames are not numbered contiguously from 0 (expected " +
                          std::to_string(i) + ")");
    }
    frame_files_.push_back(found[i].second);
  }
  if (frame_files_.empty()) throw DataError(describe(frames), 0, "no frame files");

  poses_ = read_poses(dir_ / "poses.txt");
  if (poses_.size() < frame_files_.size()) {
    throw DataError(describe(dir_ / "poses.txt"), 0,
                    std::to_string(poses_.size()) + " poses for " +
                        std::to_string(frame_files_.size()) + " frames");
  }
  if (fs::exists(dir_ / "config.json")) config_ = read_run_config(dir_ / "config.json");
  has_labels_ = fs::is_directory(dir_ / "labels");
}

bool Sequence::has_labels(int i) const {
  return has_labels_ && fs::exists(dir_ / "labels" / frame_file_name(i));
}

Frame Sequence::frame(int i) const {
  Frame f;
  f.index = i;
  f.points = read_points(frame_files_.at(i));
  f.pose = poses_.at(i);
  return f;
}

std::vector<std::uint8_t> Sequence::labels(int i, std::size_t points) const {
  const fs::path path = dir_ / "labels" / frame_file_name(i);
  std::vector<std::uint8_t> labels = read_labels(path);
  if (labels.size() != points) {
    throw DataError(describe(path), 0,
                    std::to_string(labels.size()) + " labels for " + std::to_string(points) +
                        " points");
  }
  return labels;
}

}  // namespace dynvox
