#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anchorloc/localizer.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/metrics.h"
#include "anchorloc/pnp.h"
#include "anchorloc/refiner.h"

namespace anchorloc {

enum class PipelineMode { kFull, kNoRefine, kGlobalOnly };

std::string ToString(PipelineMode mode);

struct DatasetPaths {
  std::filesystem::path map_frames;    // .afeat files or .pgm images
  std::filesystem::path map_poses;
  std::filesystem::path query_frames;
  std::filesystem::path intrinsics;
  std::filesystem::path ground_truth;  // optional
  // Optional directory of enhanced query images; replaces query_frames.
  std::filesystem::path enhanced_queries;
};

struct PipelineConfig {
  DatasetPaths dataset;
  std::filesystem::path output_dir = "anchorloc_out";
  int max_keypoints = 512;
  double ratio = kDefaultRatio;
  int adjacency = 50;
  TriangulationGates gates;
  TemporalParams temporal;
  RansacParams ransac;
  int min_register_inliers = 15;
  int refine_max_passes = 10;
  bool bundle_adjust = true;
  std::uint64_t seed = 0;
  PipelineMode mode = PipelineMode::kFull;
  std::vector<Threshold> thresholds = DefaultThresholds();

  // Throws ValidationError.
  void Validate() const;

  MapBuildOptions MapOptions() const;
  TemporalParams Temporal() const;
  RansacParams Ransac() const;
  RefineParams Refine() const;
};

// Paths of the standard synthetic dataset layout under `root` (see
// WriteDataset); ground truth only when gt/poses.txt exists.
DatasetPaths DatasetFromRoot(const std::filesystem::path& root);

// Parses the JSON configuration. Relative paths are resolved against
// base_dir. Unknown keys and invalid values raise ValidationError.
PipelineConfig ParseConfig(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
PipelineConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigToJson(const PipelineConfig& config);

}  // namespace anchorloc
