#include "anchorloc/pipeline.h"

#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

#include "anchorloc/errors.h"
#include "anchorloc/parallel.h"
#include "json.hpp"

namespace anchorloc {
namespace fs = std::filesystem;

namespace {

// Numeric stem of `<id>.<ext>`, or nullopt for files that do not follow it.
std::optional<FrameId> FrameIdFromName(const fs::path& p) {
  const std::string stem = p.stem().string();
  if (stem.empty() || stem.size() > 18) return std::nullopt;
  for (char c : stem) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return std::stoll(stem);
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

template <typename Fn>
auto RunStage(const std::string& stage, std::map<std::string, double>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings[stage] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } else {
      auto r = fn();
      timings[stage] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

FrameFeatures ExtractFrameFeatures(const Image& image, int max_keypoints) {
  FrameFeatures f;
  f.keypoints = DetectAndDescribe(image, max_keypoints);
  f.global = ComputeGlobalDescriptor(image);
  return f;
}

std::map<FrameId, FrameFeatures> LoadFrames(const fs::path& dir, int max_keypoints) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  bool has_features = false;
  std::vector<std::pair<FrameId, fs::path>> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".afeat") has_features = true;
    if (ext == ".pgm") {
      if (auto id = FrameIdFromName(entry.path())) images.emplace_back(*id, entry.path());
    }
  }
  if (has_features) return ImportFeatureDirectory(dir);
  if (images.empty()) throw InsufficientFrames("no frames in " + dir.string());
  std::sort(images.begin(), images.end());

  std::vector<FrameFeatures> features(images.size());
  ParallelFor(images.size(), [&](std::size_t i) {
    features[i] = ExtractFrameFeatures(ReadPgm(images[i].second), max_keypoints);
  });
  std::map<FrameId, FrameFeatures> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!out.emplace(images[i].first, std::move(features[i])).second) {
      throw ValidationError("duplicate frame id " + std::to_string(images[i].first));
    }
  }
  return out;
}

SceneDatabase BuildMapFromDisk(const fs::path& frames_dir, const fs::path& poses_file,
                               const CameraIntrinsics& k, const MapBuildOptions& options,
                               int max_keypoints) {
  auto features = LoadFrames(frames_dir, max_keypoints);
  const Trajectory poses = ReadPoses(poses_file);
  std::vector<PosedFrame> frames;
  frames.reserve(features.size());
  for (auto& [id, f] : features) {
    const auto pose = poses.find(id);
    if (pose == poses.end()) {
      throw ValidationError("map frame " + std::to_string(id) + " has no pose");
    }
    PosedFrame frame;
    frame.frame_id = id;
    frame.image_ref = FeatureFileName(id);
    frame.features = std::move(f);
    frame.pose = pose->second;
    frames.push_back(std::move(frame));
  }
  for (const auto& [id, pose] : poses) {
    if (!features.count(id)) {
      throw ValidationError("pose for frame " + std::to_string(id) + " has no frame");
    }
  }
  return BuildMap(std::move(frames), k, options);
}

std::vector<QueryFrame> MakeQueryFrames(std::map<FrameId, FrameFeatures> features) {
  std::vector<QueryFrame> out;
  out.reserve(features.size());
  for (auto& [id, f] : features) out.push_back(MakeQueryFrame(id, std::move(f)));
  return out;
}

Trajectory AnchorTrajectory(const std::vector<QueryFrame>& frames) {
  Trajectory t;
  for (const auto& f : frames) {
    if (f.anchor) t[f.frame_id] = f.anchor->pose;
  }
  return t;
}

std::map<FrameId, Provenance> AnchorProvenance(const std::vector<QueryFrame>& frames) {
  std::map<FrameId, Provenance> p;
  for (const auto& f : frames) {
    p[f.frame_id] = !f.anchor                          ? Provenance::kUnlocalized
                    : f.source == AnchorSource::kGlobal ? Provenance::kAnchorGlobal
                                                        : Provenance::kAnchorTemporal;
  }
  return p;
}

void WriteProvenance(const fs::path& path, const std::map<FrameId, Provenance>& provenance) {
  std::ostringstream out;
  out << "# frame_id\tprovenance\n";
  for (const auto& [id, p] : provenance) out << id << '\t' << ToString(p) << '\n';
  WriteText(path, out.str());
}

std::map<FrameId, Provenance> ReadProvenance(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<FrameId, Provenance> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    FrameId id = 0;
    std::string tag;
    if (!(fields >> id >> tag)) throw FormatError("malformed provenance line", line_no);
    try {
      out[id] = ParseProvenance(tag);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return out;
}

PipelineResult RunPipeline(const PipelineConfig& config) {
  config.Validate();
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  WriteText(out / "config.json", ConfigToJson(config));

  std::map<std::string, double> timings;
  const CameraIntrinsics k =
      RunStage("map", timings, [&] { return ReadIntrinsics(config.dataset.intrinsics); });

  const SceneDatabase db = RunStage("map", timings, [&] {
    auto db = BuildMapFromDisk(config.dataset.map_frames, config.dataset.map_poses, k,
                               config.MapOptions(), config.max_keypoints);
    SaveDatabase(out / "database", db);
    return db;
  });

  LocalizeSession session;
  session.database = fs::absolute(out / "database");
  session.queries = fs::absolute(config.dataset.enhanced_queries.empty()
                                     ? config.dataset.query_frames
                                     : config.dataset.enhanced_queries);
  session.intrinsics = k;
  session.temporal = config.Temporal();
  session.ransac = config.Ransac();
  session.max_keypoints = config.max_keypoints;
  session.temporal_enabled = config.mode != PipelineMode::kGlobalOnly;

  const LocalizationResult loc = RunStage("localize", timings, [&] {
    auto queries = MakeQueryFrames(LoadFrames(session.queries, session.max_keypoints));
    auto r = LocalizeSequence(std::move(queries), db, session.temporal, k, session.ransac,
                              session.temporal_enabled);
    WriteLocalizeLog(out / "localize_log.jsonl", session, r);
    return r;
  });

  PipelineResult result;
  result.num_anchored = loc.NumAnchored();
  result.temporal_rounds = loc.rounds;
  if (config.mode == PipelineMode::kFull) {
    RunStage("refine", timings, [&] {
      RefineResult r = RefineAll(loc.frames, db, k, config.Refine(), session.ransac);
      result.poses = std::move(r.poses);
      result.provenance = std::move(r.provenance);
      result.ba = r.ba;
    });
  } else {
    result.poses = AnchorTrajectory(loc.frames);
    result.provenance = AnchorProvenance(loc.frames);
  }
  WritePoses(out / "poses.txt", result.poses);
  WriteProvenance(out / "provenance.tsv", result.provenance);

  Trajectory gt;
  if (!config.dataset.ground_truth.empty()) {
    RunStage("evaluate", timings, [&] {
      gt = ReadPoses(config.dataset.ground_truth);
      // Every query frame is scored, so unlocalized frames count as failures.
      for (const auto& f : loc.frames) {
        if (!gt.count(f.frame_id)) {
          throw MissingGroundTruth(std::vector<std::int64_t>{f.frame_id});
        }
      }
      Trajectory scored_gt;
      for (const auto& f : loc.frames) scored_gt[f.frame_id] = gt.at(f.frame_id);
      MetricsReport report = Evaluate(result.poses, scored_gt, config.thresholds);
      // metrics.json depends only on the trajectories; timings go elsewhere.
      WriteText(out / "metrics.json", MetricsToJson(report));
      result.metrics = std::move(report);
    });
  }
  WriteTrajectoryCsv(out / "trajectory.csv", result.poses, gt, result.provenance);
  WriteText(out / "trajectory.svg", TrajectorySvg(result.poses, gt, result.provenance));

  nlohmann::json t = timings;
  if (!loc.frames.empty()) {
    t["localize_per_frame"] = timings["localize"] / static_cast<double>(loc.frames.size());
  }
  WriteText(out / "timings.json", t.dump(2) + "\n");
  if (result.metrics) result.metrics->timings_sec = t.get<std::map<std::string, double>>();
  return result;
}

}  // namespace anchorloc
