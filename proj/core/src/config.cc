#include "anchorloc/config.h"

#include <fstream>
#include <sstream>

#include "anchorloc/errors.h"
#include "json_util.h"

namespace anchorloc {
namespace {

namespace fs = std::filesystem;
using internal::json;

void ReadPath(const json& j, const char* key, fs::path* out, const fs::path& base,
              const std::string& where) {
  std::string text;
  internal::Read(j, key, &text, where);
  if (text.empty()) return;
  fs::path p(text);
  *out = p.is_absolute() || base.empty() ? p : base / p;
}

// Standard synth dataset layout under `root`.
void ApplyRoot(const fs::path& root, DatasetPaths* d) {
  auto frames_dir = [](const fs::path& seq) {
    return fs::exists(seq / "features") ? seq / "features" : seq / "images";
  };
  d->map_frames = frames_dir(root / "map");
  d->map_poses = root / "map" / "poses.txt";
  d->query_frames = frames_dir(root / "query");
  d->intrinsics = root / "intrinsics.txt";
  if (fs::exists(root / "gt" / "poses.txt")) d->ground_truth = root / "gt" / "poses.txt";
}

}  // namespace

std::string ToString(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kFull: return "full";
    case PipelineMode::kNoRefine: return "no-refine";
    case PipelineMode::kGlobalOnly: return "global-only";
  }
  return "full";
}

void PipelineConfig::Validate() const {
  try {
    MapOptions().Validate();
    Temporal().Validate();
    Ransac().Validate();
    Refine().Validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (max_keypoints < 1) throw ValidationError("config: max_keypoints must be >= 1");
  if (thresholds.empty()) throw ValidationError("config: thresholds must not be empty");
  for (const auto& t : thresholds) {
    if (!(t.translation >= 0.0) || !(t.rotation_deg >= 0.0)) {
      throw ValidationError("config: thresholds must be non-negative");
    }
  }
}

MapBuildOptions PipelineConfig::MapOptions() const {
  MapBuildOptions o;
  o.adjacency = adjacency;
  o.ratio = ratio;
  o.gates = gates;
  return o;
}

TemporalParams PipelineConfig::Temporal() const {
  TemporalParams t = temporal;
  t.ratio = ratio;
  return t;
}

RansacParams PipelineConfig::Ransac() const {
  RansacParams r = ransac;
  r.seed = seed;
  return r;
}

RefineParams PipelineConfig::Refine() const {
  RefineParams r;
  r.min_register_inliers = min_register_inliers;
  r.window = temporal.window;
  r.ratio = ratio;
  r.max_passes = refine_max_passes;
  r.gates = gates;
  r.bundle_adjust = bundle_adjust;
  r.ba.huber_scale = 2.0;
  return r;
}

DatasetPaths DatasetFromRoot(const fs::path& root) {
  DatasetPaths d;
  ApplyRoot(root, &d);
  return d;
}

PipelineConfig ParseConfig(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  internal::CheckKeys(j,
                      {"dataset", "output_dir", "features", "map", "localize", "refine",
                       "ransac", "seed", "mode", "thresholds"},
                      "config");
  PipelineConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    internal::CheckKeys(d,
                        {"root", "map_frames", "map_poses", "query_frames", "intrinsics",
                         "ground_truth", "enhanced_queries"},
                        "config.dataset");
    fs::path root;
    ReadPath(d, "root", &root, base_dir, "config.dataset");
    if (!root.empty()) ApplyRoot(root, &c.dataset);
    ReadPath(d, "map_frames", &c.dataset.map_frames, base_dir, "config.dataset");
    ReadPath(d, "map_poses", &c.dataset.map_poses, base_dir, "config.dataset");
    ReadPath(d, "query_frames", &c.dataset.query_frames, base_dir, "config.dataset");
    ReadPath(d, "intrinsics", &c.dataset.intrinsics, base_dir, "config.dataset");
    ReadPath(d, "ground_truth", &c.dataset.ground_truth, base_dir, "config.dataset");
    ReadPath(d, "enhanced_queries", &c.dataset.enhanced_queries, base_dir, "config.dataset");
  }
  ReadPath(j, "output_dir", &c.output_dir, base_dir, "config");
  if (j.contains("features")) {
    const auto& f = j.at("features");
    internal::CheckKeys(f, {"max_keypoints", "ratio"}, "config.features");
    internal::Read(f, "max_keypoints", &c.max_keypoints, "config.features");
    internal::Read(f, "ratio", &c.ratio, "config.features");
  }
  if (j.contains("map")) {
    const auto& m = j.at("map");
    internal::CheckKeys(m, {"adjacency", "max_reprojection_error", "min_triangulation_angle_deg"},
                        "config.map");
    internal::Read(m, "adjacency", &c.adjacency, "config.map");
    internal::Read(m, "max_reprojection_error", &c.gates.max_reprojection_error, "config.map");
    internal::Read(m, "min_triangulation_angle_deg", &c.gates.min_angle_deg, "config.map");
  }
  if (j.contains("localize")) {
    const auto& l = j.at("localize");
    internal::CheckKeys(l, {"n_r", "window", "iterations", "min_inliers", "guided_frames"},
                        "config.localize");
    internal::Read(l, "n_r", &c.temporal.n_r, "config.localize");
    internal::Read(l, "window", &c.temporal.window, "config.localize");
    internal::Read(l, "iterations", &c.temporal.iterations, "config.localize");
    internal::Read(l, "min_inliers", &c.temporal.min_inliers, "config.localize");
    internal::Read(l, "guided_frames", &c.temporal.guided_frames, "config.localize");
  }
  if (j.contains("refine")) {
    const auto& r = j.at("refine");
    internal::CheckKeys(r, {"min_register_inliers", "max_passes", "bundle_adjust"},
                        "config.refine");
    internal::Read(r, "min_register_inliers", &c.min_register_inliers, "config.refine");
    internal::Read(r, "max_passes", &c.refine_max_passes, "config.refine");
    internal::Read(r, "bundle_adjust", &c.bundle_adjust, "config.refine");
  }
  if (j.contains("ransac")) {
    const auto& r = j.at("ransac");
    internal::CheckKeys(r, {"threshold", "max_iterations", "confidence"}, "config.ransac");
    internal::Read(r, "threshold", &c.ransac.inlier_threshold, "config.ransac");
    internal::Read(r, "max_iterations", &c.ransac.max_iterations, "config.ransac");
    internal::Read(r, "confidence", &c.ransac.confidence, "config.ransac");
  }
  internal::Read(j, "seed", &c.seed, "config");
  if (j.contains("mode")) {
    std::string mode;
    internal::Read(j, "mode", &mode, "config");
    if (mode == "full") {
      c.mode = PipelineMode::kFull;
    } else if (mode == "no-refine") {
      c.mode = PipelineMode::kNoRefine;
    } else if (mode == "global-only") {
      c.mode = PipelineMode::kGlobalOnly;
    } else {
      throw ValidationError("config.mode must be full, no-refine or global-only");
    }
  }
  if (j.contains("thresholds")) {
    c.thresholds.clear();
    for (const auto& t : j.at("thresholds")) {
      if (!t.is_array() || t.size() != 2 || !t[0].is_number() || !t[1].is_number()) {
        throw ValidationError("config.thresholds: expected [[units, degrees], ...]");
      }
      c.thresholds.push_back({t[0].get<double>(), t[1].get<double>()});
    }
  }
  c.Validate();
  return c;
}

PipelineConfig LoadConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), path.parent_path());
}

std::string ConfigToJson(const PipelineConfig& c) {
  json thresholds = json::array();
  for (const auto& t : c.thresholds) thresholds.push_back({t.translation, t.rotation_deg});
  json j = {
      {"dataset",
       {{"map_frames", c.dataset.map_frames.string()},
        {"map_poses", c.dataset.map_poses.string()},
        {"query_frames", c.dataset.query_frames.string()},
        {"intrinsics", c.dataset.intrinsics.string()},
        {"ground_truth", c.dataset.ground_truth.string()},
        {"enhanced_queries", c.dataset.enhanced_queries.string()}}},
      {"output_dir", c.output_dir.string()},
      {"features", {{"max_keypoints", c.max_keypoints}, {"ratio", c.ratio}}},
      {"map",
       {{"adjacency", c.adjacency},
        {"max_reprojection_error", c.gates.max_reprojection_error},
        {"min_triangulation_angle_deg", c.gates.min_angle_deg}}},
      {"localize",
       {{"n_r", c.temporal.n_r},
        {"window", c.temporal.window},
        {"iterations", c.temporal.iterations},
        {"min_inliers", c.temporal.min_inliers},
        {"guided_frames", c.temporal.guided_frames}}},
      {"refine",
       {{"min_register_inliers", c.min_register_inliers},
        {"max_passes", c.refine_max_passes},
        {"bundle_adjust", c.bundle_adjust}}},
      {"ransac",
       {{"threshold", c.ransac.inlier_threshold},
        {"max_iterations", c.ransac.max_iterations},
        {"confidence", c.ransac.confidence}}},
      {"seed", c.seed},
      {"mode", ToString(c.mode)},
      {"thresholds", thresholds},
  };
  return j.dump(2) + "\n";
}

}  // namespace anchorloc
