#pragma once

#include <optional>
#include <span>
#include <vector>

#include "anchorloc/geom.h"

namespace anchorloc {

struct TriangulationObservation {
  Pose pose;
  Pixel pixel = Pixel::Zero();
};

struct TriangulationResult {
  Point3 point = Point3::Zero();
  double max_reprojection_error = 0.0;  // pixels
  // Pairwise angles between viewing rays at the point, degrees.
  double min_angle_deg = 0.0;
  double max_angle_deg = 0.0;
};

// Geometric gates shared by map building and test-time triangulation.
struct TriangulationGates {
  double max_reprojection_error = 4.0;  // pixels
  double min_angle_deg = 1.5;

  bool Accepts(const TriangulationResult& r) const {
    return r.max_reprojection_error <= max_reprojection_error &&
           r.max_angle_deg >= min_angle_deg;
  }
};

// Multi-view DLT followed by Levenberg-Marquardt on the reprojection error.
// Returns std::nullopt (degenerate) when the largest ray angle is below
// 1e-4 rad, the linear system is rank deficient, or the point ends up behind
// a camera. Throws InvalidArgument with fewer than 2 observations.
std::optional<TriangulationResult> Triangulate(
    std::span<const TriangulationObservation> observations,
    const CameraIntrinsics& k);

// Ray angles and reprojection statistics of a given point.
TriangulationResult EvaluatePoint(
    const Point3& point, std::span<const TriangulationObservation> observations,
    const CameraIntrinsics& k);

// One observation of a feature track; `group` identifies the camera, and a
// landmark uses at most one observation per group.
struct TrackObservation {
  int group = 0;
  TriangulationObservation view;
};

struct TrackPoint {
  TriangulationResult result;
  std::vector<int> members;  // indices into the track, ascending
};

// Splits a track into geometrically consistent landmarks. Tracks merged
// across look-alike structures are separated by seeding from the two-view
// hypothesis with the largest support and recursing on the leftovers.
// Every returned point passes `gates`. Deterministic.
std::vector<TrackPoint> TriangulateTrack(std::span<const TrackObservation> track,
                                         const CameraIntrinsics& k,
                                         const TriangulationGates& gates);

}  // namespace anchorloc
