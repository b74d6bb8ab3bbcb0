#include "anchorloc/geom.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "anchorloc/errors.h"

namespace anchorloc {
namespace {

// Leaves already-unit quaternions untouched so that serialized poses
// round-trip bit for bit.
Eigen::Quaterniond Normalized(const Eigen::Quaterniond& q) {
  const double n2 = q.squaredNorm();
  if (std::abs(n2 - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return q;
  return q.normalized();
}

}  // namespace

Pose::Pose(const Eigen::Quaterniond& rotation,
           const Eigen::Vector3d& translation)
    : rotation_(Normalized(rotation)), translation_(translation) {}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(Eigen::Quaterniond(rotation).normalized()),
      translation_(translation) {}

Pose Pose::FromCenter(const Eigen::Matrix3d& rotation_wc,
                      const Eigen::Vector3d& center) {
  const Eigen::Matrix3d r_cw = rotation_wc.transpose();
  return Pose(r_cw, -r_cw * center);
}

Pose Pose::Inverse() const {
  const Eigen::Quaterniond q_inv = rotation_.conjugate();
  return Pose(q_inv, -(q_inv * translation_));
}

Pose Pose::Perturbed(const Vector6d& delta) const {
  const Eigen::Quaterniond dq = QuaternionExp(delta.head<3>());
  return Pose(dq * rotation_, translation_ + delta.tail<3>());
}

Pose Pose::SignFlipped() const {
  Pose flipped = *this;
  flipped.rotation_.coeffs() = -rotation_.coeffs();
  return flipped;
}

Pose operator*(const Pose& a, const Pose& b) {
  return Pose(a.rotation() * b.rotation(),
              a.rotation() * b.translation() + a.translation());
}

Eigen::Quaterniond QuaternionExp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    return Eigen::Quaterniond(1.0, 0.5 * omega.x(), 0.5 * omega.y(),
                              0.5 * omega.z())
        .normalized();
  }
  const double half = 0.5 * theta;
  const Eigen::Vector3d v = omega * (std::sin(half) / theta);
  return Eigen::Quaterniond(std::cos(half), v.x(), v.y(), v.z());
}

Eigen::Vector3d QuaternionLog(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double n = q.vec().norm();
  if (n < 1e-12) return 2.0 * q.vec();
  return q.vec() * (2.0 * std::atan2(n, q.w()) / n);
}

void CameraIntrinsics::Validate() const {
  std::ostringstream err;
  if (!(fx > 0.0) || !(fy > 0.0)) err << "focal lengths must be positive; ";
  if (width <= 0 || height <= 0) err << "image size must be positive; ";
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    err << "principal point must lie inside the image; ";
  }
  if (!err.str().empty()) throw InvalidArgument("intrinsics: " + err.str());
}

Eigen::Matrix3d CameraIntrinsics::K() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Eigen::Vector3d CameraIntrinsics::Bearing(const Pixel& p) const {
  return Eigen::Vector3d((p.x() - cx) / fx, (p.y() - cy) / fy, 1.0)
      .normalized();
}

std::optional<Pixel> Project(const Pose& pose, const CameraIntrinsics& k,
                             const Point3& x) {
  const Eigen::Vector3d xc = pose.Transform(x);
  if (xc.z() <= 1e-9) return std::nullopt;
  return Pixel(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
}

Pose RelativePose(const Pose& a, const Pose& b) { return b * a.Inverse(); }

double RotationErrorDeg(const Pose& a, const Pose& b) {
  // atan2 of the relative quaternion keeps precision near identity, where
  // acos of the quaternion dot product does not.
  const Eigen::Quaterniond rel = b.rotation() * a.rotation().conjugate();
  const double angle =
      2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return std::clamp(angle * 180.0 / std::numbers::pi, 0.0, 180.0);
}

double TranslationError(const Pose& a, const Pose& b) {
  return (a.Center() - b.Center()).norm();
}

Homography::Homography(const Eigen::Matrix3d& h) : h_(h) {
  if (!(std::abs(h.determinant()) > 1e-12) || !h.allFinite()) {
    throw InvalidArgument("homography is singular or non-finite");
  }
  if (std::abs(h_(2, 2)) >= 1e-12) h_ /= h_(2, 2);
}

Homography Homography::Translation(double tx, double ty) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 2) = tx;
  h(1, 2) = ty;
  return Homography(h);
}

Homography operator*(const Homography& a, const Homography& b) {
  return Homography(a.matrix() * b.matrix());
}

std::optional<Pixel> ApplyHomography(const Homography& h, const Pixel& p) {
  const Eigen::Vector3d q = h.matrix() * p.homogeneous();
  if (std::abs(q.z()) < 1e-12) return std::nullopt;
  return Pixel(q.x() / q.z(), q.y() / q.z());
}

}  // namespace anchorloc
