#include <numbers>

#include <gtest/gtest.h>

#include "anchorloc/bundle_adjustment.h"
#include "anchorloc/errors.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::PoseDistance;
using testing::TestIntrinsics;

struct Truth {
  std::vector<Pose> poses;
  std::vector<Point3> points;
};

// `views` cameras on an arc looking at `n` points; pose 0 is fixed.
BAProblem MakeProblem(Rng& rng, int views, int n, double pixel_noise, Truth* truth) {
  BAProblem p;
  p.intrinsics = TestIntrinsics();
  truth->poses.clear();
  truth->points.clear();
  for (int i = 0; i < n; ++i) {
    truth->points.emplace_back(rng.Uniform(-1, 1), rng.Uniform(-1, 1), rng.Uniform(-1, 1));
  }
  for (int v = 0; v < views; ++v) {
    const double a = -0.4 + 0.8 * v / std::max(1, views - 1);
    const Pose pose = LookAt(Eigen::Vector3d(6 * std::sin(a), -6 * std::cos(a), 0.5),
                             Point3::Zero());
    truth->poses.push_back(pose);
    p.AddPose(pose, v == 0);
  }
  for (const auto& x : truth->points) p.AddLandmark(x, false);
  for (int v = 0; v < views; ++v) {
    for (int i = 0; i < n; ++i) {
      Pixel px = *Project(truth->poses[v], p.intrinsics, truth->points[i]);
      px += pixel_noise * Pixel(rng.Normal(), rng.Normal());
      p.AddObservation(v, i, px);
    }
  }
  return p;
}

Vector6d Perturbation(Rng& rng, double deg, double units) {
  Vector6d d;
  const Eigen::Vector3d w = Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal()).normalized();
  const Eigen::Vector3d t = Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal()).normalized();
  d << w * deg * std::numbers::pi / 180.0, t * units;
  return d;
}

TEST(BundleAdjustTest, GroundTruthIsStationary) {
  Rng rng(1);
  Truth t;
  BAProblem p = MakeProblem(rng, 4, 30, 0.0, &t);
  const BAReport r = BundleAdjust(p);
  EXPECT_EQ(r.accepted_steps, 0);
  EXPECT_LT(r.final_rmse, 1e-9);
  for (std::size_t i = 0; i < p.poses.size(); ++i) {
    EXPECT_LT(PoseDistance(p.poses[i], t.poses[i]), 1e-12);
  }
}

TEST(BundleAdjustTest, RecoversPerturbedPoses) {
  Rng rng(2);
  Truth t;
  BAProblem p = MakeProblem(rng, 5, 40, 0.0, &t);
  // Landmarks fixed at the truth pin the gauge completely.
  std::fill(p.landmark_fixed.begin(), p.landmark_fixed.end(), true);
  for (std::size_t i = 1; i < p.poses.size(); ++i) {
    p.poses[i] = p.poses[i].Perturbed(Perturbation(rng, 0.5, 0.02));
  }
  const BAReport r = BundleAdjust(p);
  EXPECT_GT(r.accepted_steps, 0);
  EXPECT_LT(r.final_rmse, 1e-8);
  for (std::size_t i = 0; i < p.poses.size(); ++i) {
    EXPECT_LT(PoseDistance(p.poses[i], t.poses[i]), 1e-6);
  }
}

TEST(BundleAdjustTest, FixedPosesAreBitIdentical) {
  Rng rng(3);
  Truth t;
  BAProblem p = MakeProblem(rng, 4, 30, 0.5, &t);
  for (std::size_t i = 0; i < p.poses.size(); ++i) {
    p.pose_fixed[i] = i % 2 == 0;
    p.poses[i] = p.poses[i].Perturbed(Perturbation(rng, 0.5, 0.02));
  }
  const std::vector<Pose> before = p.poses;
  BundleAdjust(p);
  for (std::size_t i = 0; i < p.poses.size(); i += 2) {
    EXPECT_EQ(p.poses[i].rotation().coeffs(), before[i].rotation().coeffs());
    EXPECT_EQ(p.poses[i].translation(), before[i].translation());
  }
}

TEST(BundleAdjustTest, FixedLandmarksAreBitIdentical) {
  Rng rng(4);
  Truth t;
  BAProblem p = MakeProblem(rng, 4, 30, 0.5, &t);
  for (std::size_t i = 0; i < p.landmarks.size(); i += 3) p.landmark_fixed[i] = true;
  const std::vector<Point3> before = p.landmarks;
  BundleAdjust(p);
  for (std::size_t i = 0; i < p.landmarks.size(); i += 3) EXPECT_EQ(p.landmarks[i], before[i]);
}

TEST(BundleAdjustTest, CostAndRmseNeverIncrease) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Truth t;
    BAProblem p = MakeProblem(rng, 5, 40, 1.0, &t);
    for (std::size_t i = 1; i < p.poses.size(); ++i) {
      p.poses[i] = p.poses[i].Perturbed(Perturbation(rng, 1.0, 0.05));
    }
    for (auto& x : p.landmarks) x += 0.02 * Point3(rng.Normal(), rng.Normal(), rng.Normal());
    const BAReport r = BundleAdjust(p);
    EXPECT_LE(r.final_cost, r.initial_cost);
    EXPECT_LE(r.final_rmse, r.initial_rmse);
    ASSERT_EQ(r.rmse_history.size(), static_cast<std::size_t>(r.accepted_steps) + 1);
    for (std::size_t i = 1; i < r.rmse_history.size(); ++i) {
      EXPECT_LE(r.rmse_history[i], r.rmse_history[i - 1]);
    }
    EXPECT_NEAR(r.final_rmse, BAReprojectionRmse(p), 1e-12);
  }
}

TEST(BundleAdjustTest, JacobianMatchesCentralDifferences) {
  // 3 poses, 20 points, all variable except pose 0.
  Rng rng(6);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Truth t;
    BAProblem p = MakeProblem(rng, 3, 20, 2.0, &t);
    Eigen::VectorXd r0;
    const Eigen::MatrixXd j = BAJacobian(p, &r0);
    ASSERT_EQ(j.cols(), 6 * 2 + 3 * 20);
    Eigen::MatrixXd fd(j.rows(), j.cols());
    for (int c = 0; c < j.cols(); ++c) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(j.cols());
      d(c) = h;
      Eigen::VectorXd rp, rm;
      BAJacobian(ApplyBAIncrement(p, d), &rp);
      BAJacobian(ApplyBAIncrement(p, -d), &rm);
      fd.col(c) = (rp - rm) / (2 * h);
    }
    EXPECT_LT((j - fd).norm() / fd.norm(), 1e-5);
  }
}

TEST(BAProblemTest, RequiresAFixedPose) {
  Rng rng(7);
  Truth t;
  BAProblem p = MakeProblem(rng, 3, 10, 0.0, &t);
  p.pose_fixed[0] = false;
  EXPECT_THROW(BundleAdjust(p), ValidationError);
}

}  // namespace
}  // namespace anchorloc
