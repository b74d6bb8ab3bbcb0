#include <cmath>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"
#include "anchorloc/triangulation.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::TestIntrinsics;

TriangulationObservation View(const Eigen::Vector3d& center, const Point3& target,
                              const Point3& x, const CameraIntrinsics& k) {
  const Pose pose = LookAt(center, target);
  return {pose, *Project(pose, k, x)};
}

TEST(TriangulateTest, TwoExactViews) {
  Rng rng(1);
  const auto k = TestIntrinsics();
  for (int trial = 0; trial < 50; ++trial) {
    const Point3 x(rng.Uniform(-1, 1), rng.Uniform(-1, 1), rng.Uniform(-1, 1));
    const std::vector<TriangulationObservation> obs = {
        View({-1, -6, 0.5}, Point3::Zero(), x, k), View({1.5, -6, 0}, Point3::Zero(), x, k)};
    const auto r = Triangulate(obs, k);
    ASSERT_TRUE(r);
    EXPECT_LT((r->point - x).norm(), 1e-9);
    EXPECT_LT(r->max_reprojection_error, 1e-9);
    EXPECT_GT(r->min_angle_deg, 1.0);
  }
}

TEST(TriangulateTest, ZeroBaselineIsDegenerate) {
  const auto k = TestIntrinsics();
  const Point3 x(0.2, 0.1, 0.0);
  const Eigen::Vector3d c(0, -5, 0);
  const std::vector<TriangulationObservation> obs = {View(c, Point3::Zero(), x, k),
                                                     View(c, Point3(0.3, 0, 0), x, k)};
  EXPECT_FALSE(Triangulate(obs, k));
}

TEST(TriangulateTest, NeedsTwoObservations) {
  const auto k = TestIntrinsics();
  const std::vector<TriangulationObservation> obs = {
      View({0, -5, 0}, Point3::Zero(), Point3::Zero(), k)};
  EXPECT_THROW(Triangulate(obs, k), InvalidArgument);
}

// Expected squared position error of an efficient estimator: the trace of
// the Cramer-Rao bound sigma^2 (J^T J)^-1, J by central differences.
double CramerRaoTrace(const std::vector<Pose>& poses, const Point3& x, const CameraIntrinsics& k,
                      double sigma) {
  Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
  for (const Pose& p : poses) {
    Eigen::Matrix<double, 2, 3> j;
    for (int c = 0; c < 3; ++c) {
      Point3 d = Point3::Zero();
      d(c) = 1e-6;
      j.col(c) = (*Project(p, k, x + d) - *Project(p, k, x - d)) / 2e-6;
    }
    info += j.transpose() * j;
  }
  return sigma * sigma * info.inverse().trace();
}

// Five cameras 1 unit apart, 10 units from the points, 1 px noise.
double NoisyRms(double focal, double* bound) {
  Rng rng(2);
  const CameraIntrinsics k{focal, focal, 960, 540, 1920, 1080};
  double sq = 0.0, crb = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Point3 x(rng.Uniform(-1, 1), rng.Uniform(-1, 1), rng.Uniform(-1, 1));
    std::vector<TriangulationObservation> obs;
    std::vector<Pose> poses;
    for (int i = 0; i < 5; ++i) {
      auto v = View({i - 2.0, -10.0, 0.0}, Point3::Zero(), x, k);
      poses.push_back(v.pose);
      v.pixel += Pixel(rng.Normal(), rng.Normal());
      obs.push_back(v);
    }
    const auto r = Triangulate(obs, k);
    EXPECT_TRUE(r);
    if (r) sq += (r->point - x).squaredNorm();
    crb += CramerRaoTrace(poses, x, k, 1.0);
  }
  *bound = std::sqrt(crb / 100);
  return std::sqrt(sq / 100);
}

TEST(TriangulateTest, FiveNoisyViewsReachTheCramerRaoBound) {
  for (double focal : {1000.0, 2000.0, 4000.0}) {
    double bound = 0.0;
    const double rms = NoisyRms(focal, &bound);
    EXPECT_LT(rms, 1.25 * bound) << "f = " << focal;
  }
}

TEST(TriangulateTest, FiveNoisyViewsWithinOneHundredth) {
  // The bound allows 0.01 units only with a long focal length.
  double bound = 0.0;
  const double rms = NoisyRms(4000.0, &bound);
  EXPECT_LT(bound, 0.01);
  EXPECT_LT(rms, 0.01);
}

TEST(TriangulateTrackTest, SplitsMergedLookAlikes) {
  // Six cameras; the first three see point a, the last three see point b
  // with an identical appearance. One merged track must come out as two.
  const auto k = TestIntrinsics();
  const Point3 a(-0.5, 0.0, 0.0);
  const Point3 b(3.5, 0.3, 0.2);
  std::vector<TrackObservation> track;
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector3d c(i * 0.8 - 0.5, -6.0, 0.2);
    const Point3& x = i < 3 ? a : b;
    track.push_back({i, View(c, c + Eigen::Vector3d::UnitY(), x, k)});
  }
  const auto points = TriangulateTrack(track, k, TriangulationGates{});
  ASSERT_EQ(points.size(), 2u);
  for (const auto& p : points) {
    ASSERT_EQ(p.members.size(), 3u);
    const Point3& x = p.members.front() < 3 ? a : b;
    EXPECT_LT((p.result.point - x).norm(), 1e-9);
  }
}

TEST(TriangulateTrackTest, GatesApply) {
  const auto k = TestIntrinsics();
  const Point3 x(0, 0, 0);
  // Tiny baseline at distance: angle below the 1.5 degree gate.
  std::vector<TrackObservation> track = {
      {0, View({0, -20, 0}, Point3::Zero(), x, k)},
      {1, View({0.1, -20, 0}, Point3::Zero(), x, k)}};
  EXPECT_TRUE(TriangulateTrack(track, k, TriangulationGates{}).empty());
  TriangulationGates loose;
  loose.min_angle_deg = 0.1;
  EXPECT_EQ(TriangulateTrack(track, k, loose).size(), 1u);
}

}  // namespace
}  // namespace anchorloc
