#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anchorloc/config.h"
#include "anchorloc/feature_file.h"
#include "anchorloc/localizer.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/metrics.h"
#include "anchorloc/refiner.h"

namespace anchorloc {

// Detector keypoints plus the image global descriptor.
FrameFeatures ExtractFrameFeatures(const Image& image, int max_keypoints);

// Frames of a directory: `<id>.afeat` feature files when present, otherwise
// `<id>.pgm` images run through the detector. Keyed by frame id.
std::map<FrameId, FrameFeatures> LoadFrames(const std::filesystem::path& dir,
                                            int max_keypoints);

// Map building from a frames directory and a pose file; every pose needs
// a frame and vice versa.
SceneDatabase BuildMapFromDisk(const std::filesystem::path& frames_dir,
                               const std::filesystem::path& poses_file,
                               const CameraIntrinsics& k, const MapBuildOptions& options,
                               int max_keypoints);

std::vector<QueryFrame> MakeQueryFrames(std::map<FrameId, FrameFeatures> features);

// Everything needed to resume from a localization run.
struct LocalizeSession {
  std::filesystem::path database;
  std::filesystem::path queries;
  CameraIntrinsics intrinsics;
  TemporalParams temporal;
  RansacParams ransac;
  int max_keypoints = 512;
  bool temporal_enabled = true;
};

// JSON lines: one session record, one record per frame per attempt, then one
// final state record per frame.
void WriteLocalizeLog(const std::filesystem::path& path, const LocalizeSession& session,
                      const LocalizationResult& result);

struct LocalizeState {
  LocalizeSession session;
  std::vector<QueryFrame> frames;  // keypoints reloaded from session.queries
  std::vector<AttemptRecord> log;
};

LocalizeState ReadLocalizeLog(const std::filesystem::path& path);

Trajectory AnchorTrajectory(const std::vector<QueryFrame>& frames);
std::map<FrameId, Provenance> AnchorProvenance(const std::vector<QueryFrame>& frames);

void WriteProvenance(const std::filesystem::path& path,
                     const std::map<FrameId, Provenance>& provenance);
std::map<FrameId, Provenance> ReadProvenance(const std::filesystem::path& path);

// Per-frame CSV: id, provenance, estimated and true centers, errors.
void WriteTrajectoryCsv(const std::filesystem::path& path, const Trajectory& estimate,
                        const Trajectory& ground_truth,
                        const std::map<FrameId, Provenance>& provenance);
// Top-down (x, y) view of both trajectories as a standalone SVG.
std::string TrajectorySvg(const Trajectory& estimate, const Trajectory& ground_truth,
                          const std::map<FrameId, Provenance>& provenance);

struct PipelineResult {
  Trajectory poses;
  std::map<FrameId, Provenance> provenance;
  std::optional<MetricsReport> metrics;  // when ground truth is configured
  BAReport ba;
  std::size_t num_anchored = 0;
  int temporal_rounds = 0;
};

// map -> localize -> refine -> evaluate, writing into config.output_dir:
// database/, localize_log.jsonl, poses.txt, provenance.tsv, metrics.json,
// trajectory.csv, trajectory.svg and config.json. Failures are raised as
// StageError naming the stage; artifacts written so far are kept.
PipelineResult RunPipeline(const PipelineConfig& config);

}  // namespace anchorloc
