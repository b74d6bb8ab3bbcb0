#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchorloc/feature_file.h"
#include "anchorloc/features.h"
#include "anchorloc/geom.h"
#include "anchorloc/pnp.h"
#include "anchorloc/pose_io.h"
#include "anchorloc/triangulation.h"

namespace anchorloc {

struct KeypointRef {
  FrameId frame_id = 0;
  int keypoint = 0;

  friend bool operator==(const KeypointRef&, const KeypointRef&) = default;
};

struct Landmark {
  LandmarkId id = 0;
  Point3 position = Point3::Zero();
  std::vector<KeypointRef> observations;
  double mean_reprojection_error = 0.0;  // pixels
};

using LandmarkTable = std::map<LandmarkId, Landmark>;

struct MapFrame {
  FrameId frame_id = 0;
  std::string image_ref;
  KeypointSet keypoints;
  std::vector<std::optional<LandmarkId>> point_ids;  // one per keypoint
  Pose pose;
  GlobalDescriptor global;
};

struct MapBuildOptions {
  int adjacency = 50;
  double ratio = kDefaultRatio;
  TriangulationGates gates;

  void Validate() const;
};

// Immutable after construction; safe for concurrent readers.
class SceneDatabase {
 public:
  SceneDatabase() = default;
  // Throws ValidationError when frame ids are not strictly increasing or the
  // frame/landmark tables are inconsistent.
  SceneDatabase(CameraIntrinsics intrinsics, std::vector<MapFrame> frames,
                LandmarkTable landmarks, MapBuildOptions options = {});

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const std::vector<MapFrame>& frames() const { return frames_; }
  const LandmarkTable& landmarks() const { return landmarks_; }
  const MapBuildOptions& options() const { return options_; }
  bool empty() const { return frames_.empty(); }

  const MapFrame* FindFrame(FrameId id) const;
  const Landmark* FindLandmark(LandmarkId id) const;

  // Top-n_r frame ids by descending cosine similarity, ties by ascending id.
  // Exhaustive. Throws EmptyDatabase / InvalidArgument (n_r < 1).
  std::vector<FrameId> Retrieve(const GlobalDescriptor& query, int n_r) const;

  // Bidirectional frame <-> landmark consistency and the landmark
  // invariants. Throws ValidationError describing the first violation.
  void CheckConsistency() const;

 private:
  CameraIntrinsics intrinsics_;
  std::vector<MapFrame> frames_;
  LandmarkTable landmarks_;
  MapBuildOptions options_;
  std::unordered_map<FrameId, std::size_t> frame_index_;
};

struct PosedFrame {
  FrameId frame_id = 0;
  std::string image_ref;
  FrameFeatures features;
  Pose pose;
};

// Matches every frame with its next `adjacency` frames, merges matches into
// tracks and triangulates each track from the known poses. Tracks that mix
// geometrically incompatible observations (e.g. repeated structures) are
// split into consistent subsets; subsets failing the gates are dropped.
// Deterministic. Throws InsufficientFrames (< 2 frames), InvalidArgument
// (non-finite pose, bad options) and DegenerateGeometry (no landmark).
SceneDatabase BuildMap(std::vector<PosedFrame> frames, const CameraIntrinsics& k,
                       const MapBuildOptions& options = {});

// Connected components of the pairwise match graph over (frame index,
// keypoint) nodes, as lists of nodes. Exposed for diagnostics and tests.
struct TrackNode {
  int frame = 0;  // index into the input frame list
  int keypoint = 0;
};
std::vector<std::vector<TrackNode>> BuildTracks(
    const std::vector<PosedFrame>& frames, int adjacency, double ratio);

// Directory layout: manifest.json, frames.tsv, landmarks.bin and
// features/<id>.afeat.
void SaveDatabase(const std::filesystem::path& dir, const SceneDatabase& db);
SceneDatabase LoadDatabase(const std::filesystem::path& dir);

void WriteLandmarks(const std::filesystem::path& path, const LandmarkTable& table);
LandmarkTable ReadLandmarks(const std::filesystem::path& path);

}  // namespace anchorloc
