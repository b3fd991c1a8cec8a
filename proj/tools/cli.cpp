// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <tbb/global_control.h>

#include "dynvox/pipeline.hpp"
#include "dynvox/scene_sim.hpp"

namespace dynvox::cli {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

/// A failure that maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Command-line overrides of the sequence config. Unset fields keep the
// stored value.
struct Overrides {
  std::optional<double> voxel_size;
  std::optional<int> voxels_per_block;
  std::optional<double> truncation;
  std::optional<double> tau_d;
  std::optional<int> tau_s;
  std::optional<int> tau_w;
  std::optional<std::string> tau_r;
  std::optional<int> tau_c;
  std::optional<std::string> max_range;
  std::optional<double> max_drift_rate;
  std::optional<int> connectivity;
  std::optional<int> threads;
  bool no_occupancy_cue = false;
  bool no_tsdf_cue = false;
  bool no_temporal_window = false;
  bool no_spatial_margin = false;
  bool no_sparsity_compensation = false;
  bool no_cluster_filter = false;
  std::string config_file;
};

void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "Config JSON replacing the sequence's config.json");
  app->add_option("--voxel-size", o.voxel_size, "Voxel edge length [m]");
  app->add_option("--voxels-per-block", o.voxels_per_block, "Voxels per block (a perfect cube)");
  app->add_option("--truncation", o.truncation, "TSDF truncation distance [m]");
  app->add_option("--tau-d", o.tau_d, "Occupancy distance threshold [m]");
  app->add_option("--tau-s", o.tau_s, "Tolerated missed frames in an occupancy run");
  app->add_option("--tau-w", o.tau_w, "Frames a voxel must stay unoccupied before it is free");
  app->add_option("--tau-r", o.tau_r, "Drift reset duration in frames, or \"inf\"");
  app->add_option("--tau-c", o.tau_c, "Minimum cluster size [voxels]");
  app->add_option("--max-range", o.max_range, "Maximum integration distance [m], or \"inf\"");
  app->add_option("--max-drift-rate", o.max_drift_rate,
                  "Expected maximum drift rate [m/s]; derives --tau-r");
  app->add_option("--connectivity", o.connectivity, "Neighborhood: 6 or 26")
      ->check(CLI::IsMember({6, 26}));
  app->add_option("--threads", o.threads, "Worker threads (env DYNVOX_THREADS)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--no-occupancy-cue", o.no_occupancy_cue, "Ignore direct point hits");
  app->add_flag("--no-tsdf-cue", o.no_tsdf_cue, "Ignore fused distances for occupancy");
  app->add_flag("--no-temporal-window", o.no_temporal_window, "Disable the temporal window");
  app->add_flag("--no-spatial-margin", o.no_spatial_margin, "Free test on the voxel alone");
  app->add_flag("--no-sparsity-compensation", o.no_sparsity_compensation,
                "Disable missed-frame tolerance");
  app->add_flag("--no-cluster-filter", o.no_cluster_filter, "Keep clusters of any size");
}

json number_or_inf(const std::string& flag, const std::string& value, bool integral) {
  if (value == "inf") return "inf";
  try {
    std::size_t used = 0;
    if (integral) {
      const int v = std::stoi(value, &used);
      if (used == value.size()) return v;
    } else {
      const double v = std::stod(value, &used);
      if (used == value.size()) return std::isinf(v) ? json("inf") : json(v);
    }
  } catch (const std::exception&) {
  }
  throw UsageError(flag + ": expected a number or \"inf\", got \"" + value + "\"");
}

std::optional<int> env_int(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) {
    throw UsageError(std::string(name) + ": expected a positive integer, got \"" + v + "\"");
  }
  return static_cast<int>(n);
}

RunConfig resolve_config(const Sequence& sequence, const Overrides& o) {
  json j = o.config_file.empty() ? run_config_to_json(sequence.config())
                                 : run_config_to_json(read_run_config(o.config_file));
  if (o.voxel_size) {
    j["voxel_size"] = *o.voxel_size;
    // Re-derive the voxel-relative distances unless given explicitly.
    j.erase("truncation_distance");
    j.erase("occupancy_threshold");
  }
  if (o.voxels_per_block) j["voxels_per_block"] = *o.voxels_per_block;
  if (o.truncation) j["truncation_distance"] = *o.truncation;
  if (o.tau_d) j["occupancy_threshold"] = *o.tau_d;
  if (o.tau_s) j["sparsity_frames"] = *o.tau_s;
  if (o.tau_w) j["temporal_window"] = *o.tau_w;
  if (o.tau_r) {
    j["drift_reset_frames"] = number_or_inf("--tau-r", *o.tau_r, true);
    j["max_drift_rate"] = nullptr;
  }
  if (o.tau_c) j["min_cluster_size"] = *o.tau_c;
  if (o.max_range) j["max_integration_distance"] = number_or_inf("--max-range", *o.max_range, false);
  if (o.max_drift_rate) j["max_drift_rate"] = *o.max_drift_rate;
  if (o.connectivity) j["connectivity"] = *o.connectivity;
  if (o.no_occupancy_cue) j["ablation"]["occupancy_cue"] = false;
  if (o.no_tsdf_cue) j["ablation"]["tsdf_cue"] = false;
  if (o.no_temporal_window) j["ablation"]["temporal_window"] = false;
  if (o.no_spatial_margin) j["ablation"]["spatial_margin"] = false;
  if (o.no_sparsity_compensation) j["ablation"]["sparsity_compensation"] = false;
  if (o.no_cluster_filter) j["ablation"]["cluster_filter"] = false;

  RunConfig config;
  try {
    config = run_config_from_json(j);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (o.threads) config.threads = *o.threads;
  else if (const auto env = env_int("DYNVOX_THREADS")) config.threads = *env;
  return config;
}

fs::path resolve_output(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DYNVOX_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

std::string fmt(const std::optional<double>& v, int precision = 3) {
  return v ? fmt(*v, precision) : std::string("n/a");
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string(), 0, "cannot open for writing");
  body(out);
}

void print_summary(std::ostream& out, const std::vector<FrameMetrics>& metrics) {
  if (metrics.empty()) {
    out << "no ground truth: metrics skipped\n";
    return;
  }
  const Summary s = aggregate(metrics);
  out << "frames " << s.frames << "  mean IoU " << fmt(s.iou.mean) << " (min " << fmt(s.iou.min)
      << ", max " << fmt(s.iou.max) << ")  precision " << fmt(s.pooled_precision) << "  recall "
      << fmt(s.pooled_recall) << "  pooled IoU " << fmt(s.pooled_iou) << '\n';
}

void print_fit(std::ostream& out, const char* name, const LinearFit& fit) {
  out << "  " << name << ": ";
  if (!fit.defined()) {
    out << "undefined (constant regressor)\n";
    return;
  }
  out << "slope " << fmt(*fit.slope, 5) << "  intercept " << fmt(*fit.intercept, 3) << "  R^2 "
      << fmt(*fit.r_squared, 4) << '\n';
}

// --- subcommands -----------------------------------------------------------

struct RunOptions {
  std::string sequence;
  std::string out;
  Overrides overrides;
};

int cmd_run(const RunOptions& o, std::ostream& out) {
  const Sequence sequence(o.sequence);
  const RunConfig config = resolve_config(sequence, o.overrides);
  const fs::path out_dir = resolve_output(o.out, "dynvox_out");
  fs::create_directories(out_dir / "labels");

  const SequenceRun run = run_sequence(sequence, config, [&](int t, const DetectionResult& d) {
    write_labels(out_dir / "labels" / frame_file_name(t), d.labels);
  });
  write_csv(out_dir / "timings.csv", [&](std::ostream& s) { write_timings_csv(s, run.timings); });
  if (sequence.has_labels()) {
    write_csv(out_dir / "metrics.csv", [&](std::ostream& s) { write_metrics_csv(s, run.metrics); });
  }
  out << "processed " << run.timings.size() << " frames into " << out_dir.string() << '\n';
  print_summary(out, run.metrics);
  return kOk;
}

struct SynthOptions {
  std::string scene;
  std::string out;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  synthesize(o.scene, o.out);
  out << "wrote sequence to " << o.out << '\n';
  return kOk;
}

struct BenchOptions {
  std::string sequence;
  std::string csv;
  Overrides overrides;
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  const Sequence sequence(o.sequence);
  const RunConfig config = resolve_config(sequence, o.overrides);
  const SequenceRun run = run_sequence(sequence, config);
  if (!o.csv.empty()) {
    write_csv(o.csv, [&](std::ostream& s) { write_timings_csv(s, run.timings); });
  }

  std::vector<double> pre, clust, free, tsdf, total;
  for (const StageTimings& t : run.timings) {
    pre.push_back(t.pre_ms);
    clust.push_back(t.clust_ms);
    free.push_back(t.free_ms);
    tsdf.push_back(t.tsdf_ms);
    total.push_back(t.total_ms());
  }
  const auto row = [&](const char* name, const std::vector<double>& v) {
    const Stat s = mean_std(v);
    out << "  " << std::left << std::setw(8) << name << std::right << fmt(s.mean, 2) << " +- "
        << fmt(s.stddev, 2) << " ms\n";
  };
  out << "frames: " << run.timings.size() << "  threads: " << config.threads << '\n';
  row("pre", pre);
  row("clust", clust);
  row("free", free);
  row("tsdf", tsdf);
  row("total", total);
  const double mean_total = mean_std(total).mean;
  out << "fps: " << (mean_total > 0.0 ? fmt(1000.0 / mean_total, 2) : std::string("n/a")) << '\n';
  if (run.timings.size() >= 10) {
    const ScalingFit fit = fit_scaling(run.timings);
    out << "scaling fits:\n";
    print_fit(out, "tsdf ~ blocks", fit.tsdf_vs_blocks);
    print_fit(out, "free ~ blocks", fit.free_vs_blocks);
    print_fit(out, "tsdf+free ~ blocks", fit.map_update_vs_blocks);
    print_fit(out, "tsdf ~ free", fit.tsdf_vs_free);
  } else {
    out << "scaling fits: need at least 10 frames\n";
  }
  return kOk;
}

struct AblateOptions {
  std::string sequence;
  std::string csv;
  Overrides overrides;
};

int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const Sequence sequence(o.sequence);
  if (!sequence.has_labels()) throw DataError(o.sequence, 0, "ablation needs ground-truth labels");
  const RunConfig base = resolve_config(sequence, o.overrides);

  struct Variant {
    const char* name;
    bool AblationToggles::*toggle;
  };
  const Variant variants[] = {
      {"full method", nullptr},
      {"w/o occupancy cue", &AblationToggles::occupancy_cue},
      {"w/o tsdf cue", &AblationToggles::tsdf_cue},
      {"w/o temporal window", &AblationToggles::temporal_window},
      {"w/o spatial margin", &AblationToggles::spatial_margin},
      {"w/o sparsity compensation", &AblationToggles::sparsity_compensation},
      {"w/o cluster filter", &AblationToggles::cluster_filter},
  };
  std::vector<std::pair<std::string, std::optional<double>>> rows;
  for (const Variant& v : variants) {
    RunConfig config = base;
    if (v.toggle != nullptr) config.map.ablation.*(v.toggle) = false;
    const SequenceRun run = run_sequence(sequence, config);
    rows.emplace_back(v.name, run.metrics.empty() ? std::nullopt : aggregate(run.metrics).iou.mean);
  }

  const std::optional<double> full = rows.front().second;
  const auto delta = [&](const std::optional<double>& iou) -> std::optional<double> {
    if (!iou || !full) return std::nullopt;
    return 100.0 * (*iou - *full);
  };
  out << std::left << std::setw(28) << "variant" << std::right << std::setw(10) << "IoU [%]"
      << std::setw(10) << "delta" << '\n';
  for (const auto& [name, iou] : rows) {
    out << std::left << std::setw(28) << name << std::right << std::setw(10)
        << (iou ? fmt(100.0 * *iou, 1) : "n/a") << std::setw(10) << fmt(delta(iou), 1) << '\n';
  }
  if (!o.csv.empty()) {
    write_csv(o.csv, [&](std::ostream& s) {
      s << "variant,iou,delta\n";
      for (const auto& [name, iou] : rows) {
        s << name << ',' << (iou ? fmt(*iou, 6) : "") << ',' << (delta(iou) ? fmt(*delta(iou), 4) : "")
          << '\n';
      }
    });
  }
  return kOk;
}

struct EvalOptions {
  std::string sequence;
  std::string predictions;
  std::string csv;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const Sequence sequence(o.sequence);
  if (!sequence.has_labels()) throw DataError(o.sequence, 0, "no ground-truth labels");
  fs::path pred_dir = o.predictions;
  if (fs::is_directory(pred_dir / "labels")) pred_dir /= "labels";
  std::vector<FrameMetrics> metrics;
  for (int t = 0; t < sequence.num_frames(); ++t) {
    if (!sequence.has_labels(t)) continue;
    const std::vector<std::uint8_t> predicted = read_labels(pred_dir / frame_file_name(t));
    const std::vector<std::uint8_t> truth = sequence.labels(t, predicted.size());
    metrics.push_back(score_frame(predicted, truth, t));
  }
  if (metrics.empty()) throw DataError(o.sequence, 0, "no annotated frames");
  if (!o.csv.empty()) write_csv(o.csv, [&](std::ostream& s) { write_metrics_csv(s, metrics); });
  print_summary(out, metrics);
  return kOk;
}

}  // namespace

SequenceRun run_sequence(const Sequence& sequence, const RunConfig& config,
                         const std::function<void(int, const DetectionResult&)>& on_frame) {
  tbb::global_control threads(tbb::global_control::max_allowed_parallelism,
                              static_cast<std::size_t>(config.threads));
  Pipeline pipeline(config.effective_map_config());
  SequenceRun run;
  for (int t = 0; t < sequence.num_frames(); ++t) {
    const Frame frame = sequence.frame(t);
    FrameResult result = pipeline.process(frame);
    if (sequence.has_labels(t)) {
      const std::vector<std::uint8_t> truth = sequence.labels(t, frame.points.size());
      run.metrics.push_back(score_frame(result.detection.labels, truth, t));
    }
    if (on_frame) on_frame(t, result.detection);
    run.timings.push_back(result.timings);
  }
  return run;
}

void synthesize(const fs::path& scene_file, const fs::path& out_dir) {
  const SyntheticScene scene = load_scene(scene_file.string());
  const std::vector<Eigen::Isometry3d> truth = scene.true_poses();
  const std::vector<Eigen::Isometry3d> estimated = apply_drift(truth, scene.drift, scene.frame_rate);

  fs::create_directories(out_dir);
  for (const char* sub : {"frames", "labels"}) {
    const fs::path d = out_dir / sub;
    if (fs::exists(d)) fs::remove_all(d);
    fs::create_directories(d);
  }
  for (int t = 0; t < scene.frames; ++t) {
    const RenderedFrame r = render_frame(scene, t);
    write_points(out_dir / "frames" / frame_file_name(t), r.frame.points);
    write_labels(out_dir / "labels" / frame_file_name(t), r.labels);
  }
  write_poses(out_dir / "poses.txt", estimated);
  write_poses(out_dir / "true_poses.txt", truth);
  write_run_config(out_dir / "config.json", scene.config);
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dynvox: moving-object detection in LiDAR sequences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dynvox 0.1.0");

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Label every frame of a sequence");
  run_cmd->add_option("sequence", run.sequence, "Sequence directory")->required();
  run_cmd->add_option("--out", run.out, "Output directory (env DYNVOX_OUTPUT_DIR)");
  add_config_flags(run_cmd, run.overrides);

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Render a scene file into a sequence");
  synth_cmd->add_option("scene", synth.scene, "Scene JSON")->required();
  synth_cmd->add_option("out", synth.out, "Output sequence directory")->required();

  BenchOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Per-stage timing report");
  bench_cmd->add_option("sequence", bench.sequence, "Sequence directory")->required();
  bench_cmd->add_option("--csv", bench.csv, "Also write per-frame timings here");
  add_config_flags(bench_cmd, bench.overrides);

  AblateOptions ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "IoU with each component disabled");
  ablate_cmd->add_option("sequence", ablate.sequence, "Sequence directory")->required();
  ablate_cmd->add_option("--csv", ablate.csv, "Also write the table here");
  add_config_flags(ablate_cmd, ablate.overrides);

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predicted labels against ground truth");
  eval_cmd->add_option("sequence", eval.sequence, "Sequence directory")->required();
  eval_cmd->add_option("predictions", eval.predictions, "Directory of predicted label files")
      ->required();
  eval_cmd->add_option("--csv", eval.csv, "Also write per-frame metrics here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (bench_cmd->parsed()) return cmd_bench(bench, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const SceneError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace dynvox::cli
