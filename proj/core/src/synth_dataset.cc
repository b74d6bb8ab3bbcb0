#include <fstream>
#include <iomanip>
#include <sstream>

#include "anchorloc/errors.h"
#include "anchorloc/synth.h"
#include "json_util.h"

namespace anchorloc {
namespace {

namespace fs = std::filesystem;
using internal::json;

std::vector<Eigen::Vector3d> ReadPoints(const json& j, const char* key,
                                        const std::string& where) {
  std::vector<Eigen::Vector3d> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw ValidationError(where + "." + key + ": expected a list");
  for (std::size_t i = 0; i < j.at(key).size(); ++i) {
    Eigen::Vector3d p;
    json wrapper = {{"p", j.at(key)[i]}};
    internal::ReadVec3(wrapper, "p", &p, where + "." + key + "[" + std::to_string(i) + "]");
    out.push_back(p);
  }
  return out;
}

WorldSpec ParseWorld(const json& j) {
  const std::string where = "world";
  internal::CheckKeys(j,
                      {"base_points", "cluster_center", "cluster_extent", "num_copies",
                       "copy_spacing", "copy_direction", "extra_groups", "texture_seed"},
                      where);
  WorldSpec w;
  internal::Read(j, "base_points", &w.base_points, where);
  internal::ReadVec3(j, "cluster_center", &w.cluster_center, where);
  internal::ReadVec3(j, "cluster_extent", &w.cluster_extent, where);
  internal::Read(j, "num_copies", &w.num_copies, where);
  internal::Read(j, "copy_spacing", &w.copy_spacing, where);
  internal::ReadVec3(j, "copy_direction", &w.copy_direction, where);
  internal::Read(j, "texture_seed", &w.texture_seed, where);
  if (j.contains("extra_groups")) {
    for (const auto& g : j.at("extra_groups")) {
      internal::CheckKeys(g, {"min", "max", "count"}, where + ".extra_groups");
      PointGroup pg;
      internal::ReadVec3(g, "min", &pg.min, where + ".extra_groups");
      internal::ReadVec3(g, "max", &pg.max, where + ".extra_groups");
      internal::Read(g, "count", &pg.count, where + ".extra_groups");
      w.extra_groups.push_back(pg);
    }
  }
  try {
    w.Validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return w;
}

SequenceSpec ParseSequence(const json& j, const std::string& where) {
  internal::CheckKeys(j,
                      {"path", "first_frame_id", "keypoint_noise", "outlier_rate",
                       "descriptor_noise", "blur_sigma", "image_noise", "max_keypoints",
                       "seed"},
                      where);
  SequenceSpec s;
  if (!j.contains("path")) throw ValidationError(where + ": missing 'path'");
  const auto& p = j.at("path");
  internal::CheckKeys(p, {"centers", "targets", "frames", "up"}, where + ".path");
  PathSpec path;
  path.centers = ReadPoints(p, "centers", where + ".path");
  path.targets = ReadPoints(p, "targets", where + ".path");
  internal::Read(p, "frames", &path.frames, where + ".path");
  internal::ReadVec3(p, "up", &path.up, where + ".path");
  internal::Read(j, "first_frame_id", &s.first_frame_id, where);
  internal::Read(j, "keypoint_noise", &s.keypoint_noise, where);
  internal::Read(j, "outlier_rate", &s.outlier_rate, where);
  internal::Read(j, "descriptor_noise", &s.descriptor_noise, where);
  internal::Read(j, "blur_sigma", &s.blur_sigma, where);
  internal::Read(j, "image_noise", &s.image_noise, where);
  internal::Read(j, "max_keypoints", &s.max_keypoints, where);
  internal::Read(j, "seed", &s.seed, where);
  try {
    s.trajectory = CatmullRomTrajectory(path);
    s.Validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return s;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

Trajectory ToTrajectory(const SequenceSpec& s) {
  Trajectory t;
  for (std::size_t i = 0; i < s.trajectory.size(); ++i) {
    t.emplace(s.first_frame_id + static_cast<FrameId>(i), s.trajectory[i]);
  }
  return t;
}

std::string ImageFileName(FrameId id) {
  std::string name = FeatureFileName(id);
  return name.substr(0, name.rfind('.')) + ".pgm";
}

void WriteSequence(const fs::path& dir, const World& world, const SequenceSpec& s,
                   const CameraIntrinsics& k, RenderMode mode,
                   std::ostringstream* keypoint_table) {
  if (mode == RenderMode::kFeatures) {
    fs::create_directories(dir / "features");
    const auto frames = RenderFeatures(world, s, k);
    for (const auto& f : frames) {
      ExportFeatures(dir / "features" / FeatureFileName(f.frame_id), f.features);
      if (keypoint_table == nullptr) continue;
      for (std::size_t i = 0; i < f.keypoint_point.size(); ++i) {
        *keypoint_table << f.frame_id << '\t' << i << '\t' << f.keypoint_point[i] << '\t'
                        << int{f.corrupted[i]} << '\t' << f.noiseless[i].x() << '\t'
                        << f.noiseless[i].y() << '\n';
      }
    }
  } else {
    fs::create_directories(dir / "images");
    const auto images = RenderImages(world, s, k);
    for (std::size_t i = 0; i < images.size(); ++i) {
      WritePgm(dir / "images" / ImageFileName(s.first_frame_id + static_cast<FrameId>(i)),
               images[i]);
    }
  }
  WritePoses(dir / "poses.txt", ToTrajectory(s));
}

}  // namespace

DatasetSpec ParseDatasetSpec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  internal::CheckKeys(j, {"mode", "intrinsics", "world", "map", "query"}, "spec");
  DatasetSpec spec;
  std::string mode = "features";
  internal::Read(j, "mode", &mode, "spec");
  if (mode == "features") {
    spec.mode = RenderMode::kFeatures;
  } else if (mode == "images") {
    spec.mode = RenderMode::kImages;
  } else {
    throw ValidationError("spec.mode must be 'features' or 'images'");
  }
  if (!j.contains("intrinsics") || !j.contains("world") || !j.contains("map") ||
      !j.contains("query")) {
    throw ValidationError("spec needs intrinsics, world, map and query");
  }
  const auto& ki = j.at("intrinsics");
  internal::CheckKeys(ki, {"fx", "fy", "cx", "cy", "width", "height"}, "spec.intrinsics");
  internal::Read(ki, "fx", &spec.intrinsics.fx, "spec.intrinsics");
  internal::Read(ki, "fy", &spec.intrinsics.fy, "spec.intrinsics");
  internal::Read(ki, "cx", &spec.intrinsics.cx, "spec.intrinsics");
  internal::Read(ki, "cy", &spec.intrinsics.cy, "spec.intrinsics");
  internal::Read(ki, "width", &spec.intrinsics.width, "spec.intrinsics");
  internal::Read(ki, "height", &spec.intrinsics.height, "spec.intrinsics");
  try {
    spec.intrinsics.Validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(std::string("spec.intrinsics: ") + e.what());
  }
  spec.world = ParseWorld(j.at("world"));
  spec.map = ParseSequence(j.at("map"), "map");
  spec.query = ParseSequence(j.at("query"), "query");
  return spec;
}

void WriteDataset(const fs::path& dir, const DatasetSpec& spec) {
  fs::create_directories(dir / "gt");
  const World world = GenerateWorld(spec.world);
  WriteIntrinsics(dir / "intrinsics.txt", spec.intrinsics);
  WriteSequence(dir / "map", world, spec.map, spec.intrinsics, spec.mode, nullptr);
  std::ostringstream kp_table;
  kp_table << std::setprecision(17) << "# frame_id\tkeypoint\tpoint\tcorrupted\tu\tv\n";
  WriteSequence(dir / "query", world, spec.query, spec.intrinsics, spec.mode, &kp_table);
  WritePoses(dir / "gt" / "poses.txt", ToTrajectory(spec.query));
  if (spec.mode == RenderMode::kFeatures) {
    WriteFile(dir / "gt" / "keypoints.tsv", kp_table.str());
  }
  std::ostringstream pts;
  pts << std::setprecision(17) << "# index x y z texture_seed copy\n";
  for (std::size_t i = 0; i < world.points.size(); ++i) {
    const auto& p = world.points[i];
    pts << i << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << world.texture_seeds[i]
        << ' ' << world.copy_index[i] << '\n';
  }
  WriteFile(dir / "gt" / "points.txt", pts.str());
}

}  // namespace anchorloc
