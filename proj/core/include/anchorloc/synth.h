#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anchorloc/feature_file.h"
#include "anchorloc/geom.h"
#include "anchorloc/image.h"
#include "anchorloc/pose_io.h"

namespace anchorloc {

// Axis-aligned box of uniformly drawn points with unique textures.
struct PointGroup {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
  int count = 0;
};

struct WorldSpec {
  int base_points = 200;
  Eigen::Vector3d cluster_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d cluster_extent = Eigen::Vector3d::Ones();  // half sizes
  int num_copies = 1;
  double copy_spacing = 0.0;
  Eigen::Vector3d copy_direction = Eigen::Vector3d::UnitX();
  std::vector<PointGroup> extra_groups;
  std::uint64_t texture_seed = 0;

  // Throws InvalidArgument; copies must not overlap along copy_direction.
  void Validate() const;
};

struct World {
  std::vector<Point3> points;
  std::vector<std::uint64_t> texture_seeds;
  std::vector<int> copy_index;  // -1 for extra-group points
  int base_points = 0;
};

// Copy i is the base cluster translated by i * spacing; point j of every
// copy shares texture seed j, so descriptors collide across copies.
World GenerateWorld(const WorldSpec& spec);

// Unit descriptor derived only from the texture seed.
Eigen::VectorXf TextureDescriptor(std::uint64_t texture_seed, int dim = 128);

struct PathSpec {
  std::vector<Eigen::Vector3d> centers;  // Catmull-Rom control points
  // One fixed target, or one per control point (interpolated alike).
  std::vector<Eigen::Vector3d> targets;
  int frames = 0;
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
};

// Camera looking from `center` to `target`; x right, y down, z forward.
Pose LookAt(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
            const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());
std::vector<Pose> CatmullRomTrajectory(const PathSpec& path);

struct SequenceSpec {
  std::vector<Pose> trajectory;
  FrameId first_frame_id = 0;
  double keypoint_noise = 0.0;    // pixels
  double outlier_rate = 0.0;      // in [0, 1)
  double descriptor_noise = 0.0;  // stddev of the perturbation norm
  double blur_sigma = 0.0;        // image mode only, pixels
  double image_noise = 0.0;       // image mode only, intensity
  int max_keypoints = 512;
  double min_depth = 1e-3;
  std::uint64_t seed = 0;
  // Optional extra visibility test (frame index, point index).
  std::function<bool(int, int)> visible;

  void Validate() const;
};

struct SyntheticFrame {
  FrameId frame_id = 0;
  Pose pose;
  FrameFeatures features;
  std::vector<int> keypoint_point;      // world point index per keypoint
  std::vector<Pixel> noiseless;         // exact projections
  std::vector<std::uint8_t> corrupted;  // descriptor swapped
};

// Feature-level rendering. Throws EmptyView when a pose sees no point.
std::vector<SyntheticFrame> RenderFeatures(const World& world,
                                           const SequenceSpec& spec,
                                           const CameraIntrinsics& k);

// Rasterizes textured splats into [0, 255] grayscale images, then applies
// blur_sigma / image_noise through Degrade.
std::vector<Image> RenderImages(const World& world, const SequenceSpec& spec,
                                const CameraIntrinsics& k);

// Separable Gaussian blur followed by additive Gaussian noise, clamped to
// [0, 255]. Identity for zero sigmas.
Image Degrade(const Image& image, double blur_sigma, double noise_sigma,
              std::uint64_t seed);

enum class RenderMode { kFeatures, kImages };

struct DatasetSpec {
  WorldSpec world;
  SequenceSpec map;
  SequenceSpec query;
  CameraIntrinsics intrinsics;
  RenderMode mode = RenderMode::kFeatures;
};

// Parses the JSON synth specification (see README). Throws ValidationError
// on unknown keys or invalid values.
DatasetSpec ParseDatasetSpec(const std::string& json_text);

// Writes intrinsics.txt, map/{poses.txt, features|images}, query/{...} and
// gt/{poses.txt, points.txt, keypoints.tsv}.
void WriteDataset(const std::filesystem::path& dir, const DatasetSpec& spec);

}  // namespace anchorloc
