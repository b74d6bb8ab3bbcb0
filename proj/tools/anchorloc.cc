// anchorloc command line: synth, map, localize, refine, eval, run.
//
// Exit codes: 0 success, 2 invalid input or arguments, 3 a stage failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anchorloc/config.h"
#include "anchorloc/errors.h"
#include "anchorloc/pipeline.h"
#include "anchorloc/synth.h"

namespace fs = std::filesystem;
using namespace anchorloc;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

std::string ReadText(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void MakeParent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void WriteText(const fs::path& path, const std::string& text) {
  MakeParent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// "0.1,5" -> (0.1 units, 5 degrees)
Threshold ParseThreshold(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw ValidationError("threshold '" + text + "' must look like UNITS,DEGREES");
  }
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ValidationError("threshold '" + text + "' is not numeric");
  }
}

struct LocalizeFlags {
  fs::path db, queries, intrinsics, out, log;
  int max_kp = kDefaultMaxKeypoints;
  bool global_only = false;
};

struct RefineFlags {
  fs::path db, state, out;
  bool no_ba = false;
};

struct EvalFlags {
  fs::path estimate, ground_truth, out;
  std::vector<std::string> thresholds;
};

struct RunFlags {
  fs::path config, dataset, enhanced, out;
  bool no_refine = false;
  bool global_only = false;
  bool quiet = false;
};

void RunSynth(const fs::path& spec_path, const fs::path& out) {
  const DatasetSpec spec = ParseDatasetSpec(ReadText(spec_path));
  WriteDataset(out, spec);
  std::printf("wrote %zu map and %zu query frames to %s\n", spec.map.trajectory.size(),
              spec.query.trajectory.size(), out.string().c_str());
}

void RunMap(const fs::path& images, const fs::path& poses, const fs::path& intrinsics,
            const fs::path& out, const MapBuildOptions& options, int max_kp) {
  const CameraIntrinsics k = ReadIntrinsics(intrinsics);
  const SceneDatabase db = BuildMapFromDisk(images, poses, k, options, max_kp);
  SaveDatabase(out, db);
  std::printf("map: %zu frames, %zu landmarks -> %s\n", db.frames().size(),
              db.landmarks().size(), out.string().c_str());
}

void RunLocalize(const LocalizeFlags& f, const TemporalParams& temporal,
                 const RansacParams& ransac) {
  const SceneDatabase db = LoadDatabase(f.db);
  LocalizeSession session;
  session.database = fs::absolute(f.db);
  session.queries = fs::absolute(f.queries);
  session.intrinsics = f.intrinsics.empty() ? db.intrinsics() : ReadIntrinsics(f.intrinsics);
  session.temporal = temporal;
  session.ransac = ransac;
  session.max_keypoints = f.max_kp;
  session.temporal_enabled = !f.global_only;
  auto queries = MakeQueryFrames(LoadFrames(session.queries, session.max_keypoints));
  const LocalizationResult r = LocalizeSequence(std::move(queries), db, temporal,
                                                session.intrinsics, ransac,
                                                session.temporal_enabled);
  const fs::path log = f.log.empty() ? f.out.parent_path() / "localize_log.jsonl" : f.log;
  MakeParent(f.out);
  MakeParent(log);
  WriteLocalizeLog(log, session, r);
  const Trajectory poses = AnchorTrajectory(r.frames);
  WritePoses(f.out, poses);
  WriteProvenance(f.out.parent_path() / "provenance.tsv", AnchorProvenance(r.frames));
  std::printf("localize: %zu/%zu frames anchored after %d temporal rounds; log %s\n",
              r.NumAnchored(), r.frames.size(), r.rounds, log.string().c_str());
}

void RunRefine(const RefineFlags& f, RefineParams params) {
  const LocalizeState state = ReadLocalizeLog(f.state);
  const SceneDatabase db = LoadDatabase(f.db.empty() ? state.session.database : f.db);
  if (f.no_ba) params.bundle_adjust = false;
  const RefineResult r =
      RefineAll(state.frames, db, state.session.intrinsics, params, state.session.ransac);
  MakeParent(f.out);
  WritePoses(f.out, r.poses);
  WriteProvenance(f.out.parent_path() / "provenance.tsv", r.provenance);
  std::printf("refine: %zu/%zu frames localized (%d registered), %zu new landmarks, "
              "BA rmse %.4f -> %.4f px\n",
              r.poses.size(), r.frames.size(), r.registered, r.new_landmarks.size(),
              r.ba.initial_rmse, r.ba.final_rmse);
}

void RunEval(const EvalFlags& f) {
  std::vector<Threshold> thresholds;
  for (const auto& t : f.thresholds) thresholds.push_back(ParseThreshold(t));
  if (thresholds.empty()) thresholds = DefaultThresholds();
  const MetricsReport r =
      Evaluate(ReadPoses(f.estimate), ReadPoses(f.ground_truth), thresholds);
  std::cout << FormatMetrics(r);
  if (!f.out.empty()) WriteText(f.out, MetricsToJson(r));
}

void RunAll(const RunFlags& f, PipelineConfig config) {
  if (!f.dataset.empty()) config.dataset = DatasetFromRoot(fs::absolute(f.dataset));
  if (!f.enhanced.empty()) config.dataset.enhanced_queries = f.enhanced;
  if (!f.out.empty()) config.output_dir = f.out;
  if (f.no_refine) config.mode = PipelineMode::kNoRefine;
  if (f.global_only) config.mode = PipelineMode::kGlobalOnly;
  config.Validate();
  const PipelineResult r = RunPipeline(config);
  std::printf("run (%s): %zu anchored, %zu localized, %d temporal rounds -> %s\n",
              ToString(config.mode).c_str(), r.num_anchored, r.poses.size(), r.temporal_rounds,
              config.output_dir.string().c_str());
  if (r.metrics && !f.quiet) std::cout << FormatMetrics(*r.metrics);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anchorloc: visual relocalization with temporal anchor propagation"};
  app.require_subcommand(1);

  // Defaults shared by several commands; a --config file is applied first
  // and explicit flags win.
  fs::path config_path;
  PipelineConfig defaults;
  int adjacency = defaults.adjacency;
  int max_kp = defaults.max_keypoints;
  TemporalParams temporal = defaults.temporal;
  RansacParams ransac = defaults.ransac;
  int min_register = defaults.min_register_inliers;
  std::uint64_t seed = defaults.seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
  };
  auto add_ransac = [&](CLI::App* cmd) {
    cmd->add_option("--ransac-thresh", ransac.inlier_threshold, "inlier threshold (px)");
    cmd->add_option("--ransac-iters", ransac.max_iterations, "maximum RANSAC iterations");
    cmd->add_option("--seed", seed, "random seed");
  };

  fs::path spec, synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec, "dataset specification (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "output directory")->required();

  fs::path map_images, map_poses, map_intrinsics, map_out;
  auto* map = app.add_subcommand("map", "build a scene database from posed frames");
  map->add_option("--images", map_images, "directory of .afeat files or .pgm images")
      ->required()
      ->check(CLI::ExistingDirectory);
  map->add_option("--poses", map_poses, "pose file")->required()->check(CLI::ExistingFile);
  map->add_option("--intrinsics", map_intrinsics, "intrinsics file")
      ->required()
      ->check(CLI::ExistingFile);
  map->add_option("--out", map_out, "database directory")->required();
  map->add_option("--adjacency", adjacency, "frames matched ahead of each frame");
  map->add_option("--max-kp", max_kp, "keypoint cap per image");
  add_common(map);

  LocalizeFlags lf;
  auto* localize = app.add_subcommand("localize", "localize a query sequence");
  localize->add_option("--db", lf.db, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  localize->add_option("--queries", lf.queries, "query frames directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  localize->add_option("--intrinsics", lf.intrinsics, "intrinsics file (default: database)")
      ->check(CLI::ExistingFile);
  localize->add_option("--out", lf.out, "output pose file")->required();
  localize->add_option("--log", lf.log, "state log (default: localize_log.jsonl next to --out)");
  localize->add_option("--nr", temporal.n_r, "retrieved map frames per query");
  localize->add_option("--window", temporal.window, "temporal window L (even)");
  localize->add_option("--iters", temporal.iterations, "temporal rounds");
  localize->add_option("--min-inliers", temporal.min_inliers, "anchor inlier floor s");
  localize->add_option("--max-kp", lf.max_kp, "keypoint cap per image");
  localize->add_flag("--global-only", lf.global_only, "skip temporal rounds");
  add_ransac(localize);
  add_common(localize);

  RefineFlags rf;
  auto* refine = app.add_subcommand("refine", "refine and complete a localization run");
  refine->add_option("--db", rf.db, "database directory (default: from the log)");
  refine->add_option("--state", rf.state, "localize_log.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  refine->add_option("--out", rf.out, "output pose file")->required();
  refine->add_option("--min-register-inliers", min_register, "registration inlier floor");
  refine->add_flag("--no-ba", rf.no_ba, "skip bundle adjustment");
  add_common(refine);

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "compare a trajectory with ground truth");
  eval->add_option("--est", ef.estimate, "estimated poses")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ef.ground_truth, "ground-truth poses")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--threshold", ef.thresholds, "UNITS,DEGREES (repeatable)");
  eval->add_option("--out", ef.out, "metrics JSON");

  RunFlags runf;
  auto* run = app.add_subcommand("run", "map, localize, refine and evaluate");
  run->add_option("--config", runf.config, "JSON configuration file")->check(CLI::ExistingFile);
  run->add_option("--dataset", runf.dataset, "synthetic dataset root (overrides config)")
      ->check(CLI::ExistingDirectory);
  run->add_option("--enhanced", runf.enhanced, "enhanced query images directory")
      ->check(CLI::ExistingDirectory);
  run->add_option("--out", runf.out, "output directory");
  run->add_option("--nr", temporal.n_r, "retrieved map frames per query");
  run->add_option("--window", temporal.window, "temporal window L (even)");
  run->add_option("--iters", temporal.iterations, "temporal rounds");
  run->add_option("--min-inliers", temporal.min_inliers, "anchor inlier floor s");
  run->add_flag("--no-refine", runf.no_refine, "skip refinement");
  run->add_flag("--global-only", runf.global_only,
                "global anchors only: no temporal rounds, no refinement");
  run->add_flag("--quiet", runf.quiet, "do not print the metrics summary");
  add_ransac(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    // Config file first, explicit flags on top.
    PipelineConfig config;
    const fs::path cfg = run->parsed() ? runf.config : config_path;
    if (!cfg.empty()) config = LoadConfig(cfg);
    auto given = [](CLI::App* cmd, const char* flag) { return cmd->count(flag) > 0; };
    CLI::App* active = app.get_subcommands().front();
    auto apply = [&](const char* flag, auto& target, const auto& value) {
      if (active->get_option_no_throw(flag) != nullptr && given(active, flag)) target = value;
    };
    apply("--adjacency", config.adjacency, adjacency);
    apply("--max-kp", config.max_keypoints, max_kp);
    apply("--nr", config.temporal.n_r, temporal.n_r);
    apply("--window", config.temporal.window, temporal.window);
    apply("--iters", config.temporal.iterations, temporal.iterations);
    apply("--min-inliers", config.temporal.min_inliers, temporal.min_inliers);
    apply("--ransac-thresh", config.ransac.inlier_threshold, ransac.inlier_threshold);
    apply("--ransac-iters", config.ransac.max_iterations, ransac.max_iterations);
    apply("--seed", config.seed, seed);
    apply("--min-register-inliers", config.min_register_inliers, min_register);
    config.Validate();

    if (synth->parsed()) {
      RunSynth(spec, synth_out);
    } else if (map->parsed()) {
      RunMap(map_images, map_poses, map_intrinsics, map_out, config.MapOptions(),
             config.max_keypoints);
    } else if (localize->parsed()) {
      if (!given(localize, "--max-kp")) lf.max_kp = config.max_keypoints;
      RunLocalize(lf, config.Temporal(), config.Ransac());
    } else if (refine->parsed()) {
      RunRefine(rf, config.Refine());
    } else if (eval->parsed()) {
      RunEval(ef);
    } else if (run->parsed()) {
      RunAll(runf, config);
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const StageError& e) {
    std::fprintf(stderr, "error in stage '%s': %s\n", e.stage().c_str(), e.what());
    return kExitStage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
