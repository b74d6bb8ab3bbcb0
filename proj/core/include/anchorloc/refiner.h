#pragma once

#include <map>
#include <string>
#include <vector>

#include "anchorloc/bundle_adjustment.h"
#include "anchorloc/localizer.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/triangulation.h"

namespace anchorloc {

struct RefineParams {
  int min_register_inliers = 15;
  int window = 30;  // same neighbourhood as temporal matching
  double ratio = kDefaultRatio;
  int max_passes = 10;
  TriangulationGates gates;
  bool bundle_adjust = true;
  BAOptions ba;

  void Validate() const;
};

enum class Provenance { kAnchorGlobal, kAnchorTemporal, kRefined, kUnlocalized };

std::string ToString(Provenance p);
// Throws InvalidArgument on an unknown tag.
Provenance ParseProvenance(const std::string& tag);

struct RefineResult {
  // Input frames with refine-stage associations added; registered frames
  // keep `anchor` empty.
  std::vector<QueryFrame> frames;
  Trajectory poses;  // every localized frame
  std::map<FrameId, Provenance> provenance;  // every input frame
  // Landmarks triangulated from query frames; observations reference query
  // frame ids. Ids do not collide with the reference map.
  LandmarkTable new_landmarks;
  BAReport ba;
  int passes = 0;
  int registered = 0;
};

// Triangulates new landmarks from anchored frames, registers the remaining
// frames by resection (relaxed inlier floor) and bundle-adjusts registered
// poses and new landmarks with anchors and the reference map fixed.
RefineResult RefineAll(std::vector<QueryFrame> frames, const SceneDatabase& db,
                       const CameraIntrinsics& k, const RefineParams& params,
                       const RansacParams& ransac);

// Frame <-> landmark consistency of the augmented map. Throws
// ValidationError describing the first violation.
void CheckAugmentedConsistency(const SceneDatabase& db, const RefineResult& result);

}  // namespace anchorloc
