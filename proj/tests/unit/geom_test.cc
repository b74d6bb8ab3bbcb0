#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/geom.h"
#include "anchorloc/random.h"

namespace anchorloc {
namespace {

Pose RandomPose(Rng& rng) {
  const Eigen::Vector3d w(rng.Normal(), rng.Normal(), rng.Normal());
  const Eigen::Vector3d t(rng.Uniform(-5, 5), rng.Uniform(-5, 5), rng.Uniform(-5, 5));
  return Pose(QuaternionExp(w), t);
}

TEST(ProjectTest, OpticalAxisHitsPrincipalPoint) {
  const CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 10, 10};
  const auto p = Project(Pose::Identity(), k, Point3(0, 0, 1));
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x(), 0.0);
  EXPECT_DOUBLE_EQ(p->y(), 0.0);
}

TEST(ProjectTest, HandEvaluatedPinhole) {
  const CameraIntrinsics k{100.0, 100.0, 50.0, 50.0, 100, 100};
  const auto p = Project(Pose::Identity(), k, Point3(0.1, -0.2, 2.0));
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x(), 55.0, 1e-12);
  EXPECT_NEAR(p->y(), 40.0, 1e-12);
}

TEST(ProjectTest, BehindCamera) {
  const CameraIntrinsics k{100.0, 100.0, 50.0, 50.0, 100, 100};
  EXPECT_FALSE(Project(Pose::Identity(), k, Point3(0, 0, -1)));
}

TEST(IntrinsicsTest, RejectsNonPositiveFocal) {
  CameraIntrinsics k{0.0, 1.0, 0.0, 0.0, 10, 10};
  EXPECT_THROW(k.Validate(), InvalidArgument);
}

TEST(PoseTest, CenterIsMinusRtT) {
  Rng rng(1);
  const Pose p = RandomPose(rng);
  const Eigen::Vector3d c = -(p.RotationMatrix().transpose() * p.translation());
  EXPECT_LT((p.Center() - c).norm(), 1e-12);
  EXPECT_LT(p.Transform(p.Center()).norm(), 1e-12);
}

TEST(PoseTest, InverseComposesToIdentity) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Pose p = RandomPose(rng);
    const Pose e = p * p.Inverse();
    EXPECT_LT(RotationErrorDeg(e, Pose::Identity()), 1e-9);
    EXPECT_LT(e.translation().norm(), 1e-9);
  }
}

TEST(RelativePoseTest, SelfIsIdentity) {
  Rng rng(3);
  const Pose p = RandomPose(rng);
  const Pose r = RelativePose(p, p);
  EXPECT_LT(RotationErrorDeg(r, Pose::Identity()), 1e-9);
  EXPECT_LT(r.translation().norm(), 1e-9);
}

TEST(RelativePoseTest, PureTranslation) {
  const Eigen::Vector3d t(1, -2, 3);
  const Pose r = RelativePose(Pose::Identity(), Pose(Eigen::Matrix3d::Identity(), t));
  EXPECT_LT(RotationErrorDeg(r, Pose::Identity()), 1e-12);
  EXPECT_LT((r.translation() - t).norm(), 1e-12);
}

TEST(RelativePoseTest, ComposesBackToTarget) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Pose a = RandomPose(rng);
    const Pose b = RandomPose(rng);
    const Pose c = RelativePose(a, b) * a;
    EXPECT_LT((c.RotationMatrix() - b.RotationMatrix()).norm(), 1e-9);
    EXPECT_LT((c.translation() - b.translation()).norm(), 1e-9);
  }
}

TEST(RotationErrorTest, KnownAngles) {
  const Pose a;
  EXPECT_DOUBLE_EQ(RotationErrorDeg(a, a), 0.0);
  const Pose z90(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ())),
                 Eigen::Vector3d::Zero());
  EXPECT_NEAR(RotationErrorDeg(a, z90), 90.0, 1e-9);
}

TEST(RotationErrorTest, MatchesQuaternionDotOracle) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Pose a = RandomPose(rng);
    const Pose b = RandomPose(rng);
    const double dot = std::min(1.0, std::abs(a.rotation().dot(b.rotation())));
    const double oracle = 2.0 * std::acos(dot) * 180.0 / std::numbers::pi;
    EXPECT_NEAR(RotationErrorDeg(a, b), oracle, 1e-9);
  }
}

TEST(RotationErrorTest, QuaternionSignDoesNotMatter) {
  Rng rng(6);
  const Pose a = RandomPose(rng);
  EXPECT_NEAR(RotationErrorDeg(a, a.SignFlipped()), 0.0, 1e-12);
}

TEST(QuaternionTest, ExpLogRoundTrip) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d w = Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal()) * 0.8;
    EXPECT_LT((QuaternionLog(QuaternionExp(w)) - w).norm(), 1e-12);
  }
  EXPECT_LT(QuaternionLog(QuaternionExp(Eigen::Vector3d(1e-14, 0, 0))).norm(), 1e-13);
}

TEST(HomographyTest, Identity) {
  const auto p = ApplyHomography(Homography(), Pixel(3, 4));
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x(), 3.0);
  EXPECT_DOUBLE_EQ(p->y(), 4.0);
}

TEST(HomographyTest, Translation) {
  const auto p = ApplyHomography(Homography::Translation(5, -2), Pixel(0, 0));
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x(), 5.0);
  EXPECT_DOUBLE_EQ(p->y(), -2.0);
}

TEST(HomographyTest, InverseRoundTrip) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) += rng.Uniform(-0.2, 0.2);
    }
    m(2, 0) *= 1e-3;
    m(2, 1) *= 1e-3;
    const Homography h(m);
    const Pixel p(rng.Uniform(0, 640), rng.Uniform(0, 480));
    const auto q = ApplyHomography(h, p);
    ASSERT_TRUE(q);
    const auto back = ApplyHomography(h.Inverse(), *q);
    ASSERT_TRUE(back);
    EXPECT_LT((*back - p).norm(), 1e-7);
  }
}

TEST(HomographyTest, RejectsSingular) {
  EXPECT_THROW(Homography(Eigen::Matrix3d::Zero()), Error);
}

}  // namespace
}  // namespace anchorloc
