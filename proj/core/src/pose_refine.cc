#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "anchorloc/errors.h"
#include "anchorloc/pnp.h"

namespace anchorloc {

bool ReprojectionResidual(const Pose& pose, const CameraIntrinsics& k,
                          const Point3& point, const Pixel& observed,
                          Eigen::Vector2d* residual,
                          Eigen::Matrix<double, 2, 6>* jacobian_pose,
                          Eigen::Matrix<double, 2, 3>* jacobian_point) {
  const Eigen::Vector3d rx = pose.rotation() * point;
  const Eigen::Vector3d xc = rx + pose.translation();
  if (xc.z() <= 1e-9) return false;
  const double inv_z = 1.0 / xc.z();
  *residual = Eigen::Vector2d(k.fx * xc.x() * inv_z + k.cx - observed.x(),
                              k.fy * xc.y() * inv_z + k.cy - observed.y());
  if (jacobian_pose == nullptr && jacobian_point == nullptr) return true;
  Eigen::Matrix<double, 2, 3> d_proj;
  d_proj << k.fx * inv_z, 0.0, -k.fx * xc.x() * inv_z * inv_z,
      0.0, k.fy * inv_z, -k.fy * xc.y() * inv_z * inv_z;
  if (jacobian_pose != nullptr) {
    // d(Exp(w) R X)/dw at w = 0 is -[R X]_x.
    Eigen::Matrix3d skew;
    skew << 0.0, -rx.z(), rx.y(), rx.z(), 0.0, -rx.x(), -rx.y(), rx.x(), 0.0;
    jacobian_pose->leftCols<3>() = -d_proj * skew;
    jacobian_pose->rightCols<3>() = d_proj;
  }
  if (jacobian_point != nullptr) {
    *jacobian_point = d_proj * pose.RotationMatrix();
  }
  return true;
}

double HuberCost(double squared_norm, double scale) {
  if (squared_norm <= scale * scale) return squared_norm;
  return 2.0 * scale * std::sqrt(squared_norm) - scale * scale;
}

namespace {

// Points behind the camera contribute a fixed large penalty so that steps
// moving points behind the camera are rejected.
constexpr double kBehindCameraPenalty = 1e12;

}  // namespace

double PoseCost(const Pose& pose, std::span<const Correspondence2D3D> c,
                const CameraIntrinsics& k, double huber_scale) {
  double cost = 0.0;
  Eigen::Vector2d r;
  for (const auto& x : c) {
    if (!ReprojectionResidual(pose, k, x.point, x.pixel, &r)) {
      cost += kBehindCameraPenalty;
      continue;
    }
    cost += HuberCost(r.squaredNorm(), huber_scale);
  }
  return cost;
}

Pose RefinePoseLM(const Pose& pose, std::span<const Correspondence2D3D> inliers,
                  const CameraIntrinsics& k, const PoseRefineOptions& options,
                  PoseRefineSummary* summary) {
  if (inliers.size() < 4) {
    throw InsufficientCorrespondences("pose refinement needs >= 4 inliers");
  }
  Pose current = pose;
  double cost = PoseCost(current, inliers, k, options.huber_scale);
  PoseRefineSummary local;
  local.initial_cost = cost;
  double lambda = 1e-4;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    local.iterations = iter + 1;
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 6> j;
    for (const auto& x : inliers) {
      if (!ReprojectionResidual(current, k, x.point, x.pixel, &r, &j)) continue;
      const double e = r.norm();
      const double w = e <= options.huber_scale ? 1.0 : options.huber_scale / e;
      h.noalias() += w * j.transpose() * j;
      g.noalias() += w * j.transpose() * r;
    }
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance || cost == 0.0) {
      break;
    }
    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::Matrix<double, 6, 6> damped = h;
      for (int d = 0; d < 6; ++d) damped(d, d) += lambda * (h(d, d) + 1e-9);
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Pose candidate = current.Perturbed(delta);
      const double new_cost = PoseCost(candidate, inliers, k, options.huber_scale);
      if (new_cost < cost) {
        const double decrease = (cost - new_cost) / cost;
        current = candidate;
        cost = new_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        ++local.accepted_steps;
        if (decrease < options.function_tolerance) {
          local.final_cost = cost;
          if (summary != nullptr) *summary = local;
          return current;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  local.final_cost = cost;
  if (summary != nullptr) *summary = local;
  return current;
}

}  // namespace anchorloc
