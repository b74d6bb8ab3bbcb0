#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anchorloc/localizer.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/pnp.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace anchorloc::testing {

// 640x480, f = 500.
CameraIntrinsics TestIntrinsics();

struct Scenario {
  CameraIntrinsics k;
  World world;
  std::vector<SyntheticFrame> map;
  std::vector<SyntheticFrame> queries;
  MapBuildOptions map_options;

  std::vector<PosedFrame> PosedMap() const;
  std::vector<QueryFrame> QueryFrames() const;
  Trajectory QueryTruth() const;
  SceneDatabase BuildDatabase() const;
};

// One 500-point cluster seen from a 60-frame map orbit; 150 query frames on
// a lower, tighter orbit. Noise free.
DatasetSpec ExactDatasetSpec(std::uint64_t seed = 1);
Scenario ExactScenario(std::uint64_t seed = 1);

// Four identical clusters along x with colliding descriptors between two
// unique marker blocks; 200 query frames sweep past everything.
Scenario AmbiguityScenario(std::uint64_t seed);

struct ChainOptions {
  int radius = 5;   // frames i and j share points iff |i - j| <= radius
  int frames = 100;
  std::uint64_t seed = 7;
};

// A wall of look-alike segments (same textures, different relief) passed at
// close range, so that frames share points only within `radius` of each
// other. A strip only query frame 0 sees makes it the one frame with enough
// unambiguous global matches; every other frame's global links spread over
// all segments.
Scenario ChainScenario(const ChainOptions& options);

// Every fifth query frame ("weak") sees only 1 in 20 mapped points; all frames
// also see a block of structure absent from the map. 1 px keypoint noise.
Scenario RefinementScenario(std::uint64_t seed);
bool IsWeakFrame(FrameId id);

// Small noise-free scene for unit tests: `frames` map frames of a 200-point
// cluster and a few queries along a similar path.
Scenario SmallScenario(int frames = 10, std::uint64_t seed = 3);

// Random camera pose: rotation uniform-ish, center within a 10-unit box.
Pose RandomPose(Rng& rng);

struct PnPInstance {
  Pose pose;
  std::vector<Correspondence2D3D> correspondences;  // inliers first
  int num_inliers = 0;
};

// `inliers` exact correspondences (pixels uniform in the image, depths in
// [2, 10]) followed by `outliers` whose 3D points are unrelated to their
// pixels.
PnPInstance RandomPnP(Rng& rng, const CameraIntrinsics& k, int inliers, int outliers = 0);

// Largest absolute entry difference of the rotation matrices and
// translations.
double PoseDistance(const Pose& a, const Pose& b);

// Fresh, empty directory under the system temp dir.
std::filesystem::path TempDir(const std::string& name);

// Median of a copy of `values`; NaN when empty.
double Median(std::vector<double> values);

}  // namespace anchorloc::testing
