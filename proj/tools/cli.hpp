// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0
//
// The dynvox command line. Kept as a library so the commands can be driven
// from tests without spawning processes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynvox/config.hpp"
#include "dynvox/detector.hpp"
#include "dynvox/eval.hpp"
#include "dynvox/sequence_io.hpp"

namespace dynvox::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Parses argv and dispatches to a subcommand. Never throws.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct SequenceRun {
  std::vector<StageTimings> timings;
  std::vector<FrameMetrics> metrics;  // annotated frames only
};

/// Runs the pipeline over a whole sequence. `on_frame` sees every frame's
/// detection; ground truth, when present, is scored into the metrics.
SequenceRun run_sequence(const Sequence& sequence, const RunConfig& config,
                         const std::function<void(int, const DetectionResult&)>& on_frame = {});

/// Renders a scene file into a sequence directory.
void synthesize(const std::filesystem::path& scene_file, const std::filesystem::path& out_dir);

}  // namespace dynvox::cli
