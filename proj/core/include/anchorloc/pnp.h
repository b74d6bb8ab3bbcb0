#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "anchorloc/geom.h"

namespace anchorloc {

using LandmarkId = std::int64_t;

struct Correspondence2D3D {
  Pixel pixel = Pixel::Zero();
  Point3 point = Point3::Zero();
  std::optional<LandmarkId> landmark_id;
  double score = 1.0;  // in [0, 1]
};

struct RansacParams {
  double inlier_threshold = 4.0;  // pixels
  int max_iterations = 10000;
  double confidence = 0.9999;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct PoseEstimate {
  Pose pose;
  std::vector<std::uint8_t> inlier_mask;  // one flag per correspondence
  int num_inliers = 0;
  double mean_inlier_error = 0.0;  // pixels
};

// Reprojection residual (projected - observed) and its derivatives with
// respect to a left pose increment [omega, dt] and the world point.
// Returns false when the point is behind the camera.
bool ReprojectionResidual(const Pose& pose, const CameraIntrinsics& k,
                          const Point3& point, const Pixel& observed,
                          Eigen::Vector2d* residual,
                          Eigen::Matrix<double, 2, 6>* jacobian_pose = nullptr,
                          Eigen::Matrix<double, 2, 3>* jacobian_point = nullptr);

// Huber robust cost of one residual with the given scale, rho(e^2).
double HuberCost(double squared_norm, double scale);

// All real solutions of the three-point absolute pose problem (at most 4).
// Throws DegenerateConfiguration when the world points are collinear
// (triangle area <= 1e-12).
std::vector<Pose> SolveP3P(std::span<const Correspondence2D3D> three,
                           const CameraIntrinsics& k);

// Linear (DLT) pose from >= 6 correspondences, projected onto SO(3).
std::optional<Pose> SolvePnPDlt(std::span<const Correspondence2D3D> c,
                                const CameraIntrinsics& k);

struct PoseRefineOptions {
  double huber_scale = 2.0;  // pixels
  int max_iterations = 100;
  double function_tolerance = 1e-10;  // relative cost decrease
  double gradient_tolerance = 1e-10;  // infinity norm
};

struct PoseRefineSummary {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
};

double PoseCost(const Pose& pose, std::span<const Correspondence2D3D> c,
                const CameraIntrinsics& k, double huber_scale);

// Levenberg-Marquardt on the Huber-robustified reprojection cost. Returns
// the input pose when no step is accepted. Throws
// InsufficientCorrespondences below 4 correspondences.
Pose RefinePoseLM(const Pose& pose, std::span<const Correspondence2D3D> inliers,
                  const CameraIntrinsics& k, const PoseRefineOptions& options = {},
                  PoseRefineSummary* summary = nullptr);

// P3P RANSAC with an adaptive iteration bound, DLT fallback when minimal
// samples keep degenerating, and a final LM polish on the inliers.
// Returns std::nullopt (no consensus) when fewer than 4 inliers remain.
// Throws InsufficientCorrespondences when given fewer than 4 inputs.
std::optional<PoseEstimate> EstimatePoseRansac(
    std::span<const Correspondence2D3D> c, const CameraIntrinsics& k,
    const RansacParams& params);

}  // namespace anchorloc
