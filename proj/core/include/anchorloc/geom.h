#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace anchorloc {

using Point3 = Eigen::Vector3d;
using Pixel = Eigen::Vector2d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

// Rigid world-to-camera transform: x_cam = R * x_world + t.
class Pose {
 public:
  Pose() = default;
  // The quaternion is normalized on construction.
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return Pose(); }
  // Pose of a camera centered at `center` with camera-to-world rotation R_wc.
  static Pose FromCenter(const Eigen::Matrix3d& rotation_wc,
                         const Eigen::Vector3d& center);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d RotationMatrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Vector3d Transform(const Point3& x_world) const {
    return rotation_ * x_world + translation_;
  }
  // Camera center in world coordinates, -R^T t.
  Eigen::Vector3d Center() const { return -(rotation_.conjugate() * translation_); }

  Pose Inverse() const;

  // Left-multiplied increment: R' = Exp(delta[0:3]) * R, t' = t + delta[3:6].
  Pose Perturbed(const Vector6d& delta) const;

  // Same pose with the quaternion sign flipped; a different representation of
  // the same rigid transform.
  Pose SignFlipped() const;

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

// (a * b) maps x to a(b(x)).
Pose operator*(const Pose& a, const Pose& b);

// Exponential map of a rotation vector, stable near zero.
Eigen::Quaterniond QuaternionExp(const Eigen::Vector3d& omega);
Eigen::Vector3d QuaternionLog(const Eigen::Quaterniond& q);

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws InvalidArgument when fx/fy are non-positive or the principal point
  // lies outside the image.
  void Validate() const;
  bool InImage(const Pixel& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height;
  }
  Eigen::Matrix3d K() const;
  // Unit bearing vector through pixel p.
  Eigen::Vector3d Bearing(const Pixel& p) const;
};

// Pinhole projection. Returns std::nullopt (behind camera) when the camera
// frame depth is <= 1e-9.
std::optional<Pixel> Project(const Pose& pose, const CameraIntrinsics& k,
                             const Point3& x);

// T such that T * a == b.
Pose RelativePose(const Pose& a, const Pose& b);

// Angle of the relative rotation between a and b, in [0, 180] degrees.
double RotationErrorDeg(const Pose& a, const Pose& b);

// Distance between the camera centers of a and b.
double TranslationError(const Pose& a, const Pose& b);

class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}
  // Normalizes so that H(2,2) == 1 unless |H(2,2)| < 1e-12. Throws
  // InvalidArgument when |det(H)| <= 1e-12.
  explicit Homography(const Eigen::Matrix3d& h);

  static Homography Translation(double tx, double ty);

  const Eigen::Matrix3d& matrix() const { return h_; }
  Homography Inverse() const { return Homography(h_.inverse()); }

 private:
  Eigen::Matrix3d h_;
};

Homography operator*(const Homography& a, const Homography& b);

// Projective application; std::nullopt when the point maps to infinity
// (|w| < 1e-12).
std::optional<Pixel> ApplyHomography(const Homography& h, const Pixel& p);

}  // namespace anchorloc
