#include <filesystem>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/feature_file.h"
#include "anchorloc/synth.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::TestIntrinsics;

SequenceSpec FacingCluster(int frames) {
  SequenceSpec s;
  for (int i = 0; i < frames; ++i) {
    const Eigen::Vector3d c(-1.0 + 0.1 * i, -8.0, 0.3);
    s.trajectory.push_back(LookAt(c, c + Eigen::Vector3d::UnitY()));
  }
  return s;
}

TEST(GenerateWorldTest, CopiesAreTranslatedLookAlikes) {
  WorldSpec w;
  w.base_points = 50;
  w.num_copies = 3;
  w.copy_spacing = 5.0;
  w.texture_seed = 4;
  const World world = GenerateWorld(w);
  ASSERT_EQ(world.points.size(), 150u);
  for (int c = 1; c < 3; ++c) {
    for (int j = 0; j < 50; ++j) {
      const int i = c * 50 + j;
      EXPECT_EQ(world.copy_index[i], c);
      EXPECT_LT((world.points[i] - world.points[j] - Eigen::Vector3d(5.0 * c, 0, 0)).norm(),
                1e-12);
      EXPECT_EQ(world.texture_seeds[i], world.texture_seeds[j]);
      EXPECT_EQ(TextureDescriptor(world.texture_seeds[i]),
                TextureDescriptor(world.texture_seeds[j]));
    }
  }
}

TEST(GenerateWorldTest, OverlappingCopiesAreRejected) {
  WorldSpec w;
  w.num_copies = 2;
  w.cluster_extent = Eigen::Vector3d(1.0, 1.0, 1.0);
  w.copy_spacing = 2.0;
  EXPECT_THROW(GenerateWorld(w), InvalidArgument);
  w.copy_spacing = 2.01;
  EXPECT_NO_THROW(GenerateWorld(w));
}

TEST(GenerateWorldTest, DeterministicInSeed) {
  WorldSpec w;
  w.texture_seed = 11;
  const World a = GenerateWorld(w);
  const World b = GenerateWorld(w);
  EXPECT_EQ(a.points, b.points);
  w.texture_seed = 12;
  EXPECT_NE(GenerateWorld(w).points, a.points);
}

TEST(TextureDescriptorTest, UnitNorm) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_NEAR(TextureDescriptor(s).norm(), 1.0, 1e-6);
    EXPECT_EQ(TextureDescriptor(s, 32).size(), 32);
  }
}

TEST(RenderFeaturesTest, KeypointsAreProjectionsOfTheirPoints) {
  WorldSpec w;
  w.base_points = 300;
  const World world = GenerateWorld(w);
  const auto k = TestIntrinsics();
  SequenceSpec s = FacingCluster(5);
  const auto frames = RenderFeatures(world, s, k);
  ASSERT_EQ(frames.size(), 5u);
  for (const auto& f : frames) {
    ASSERT_FALSE(f.keypoint_point.empty());
    for (std::size_t i = 0; i < f.keypoint_point.size(); ++i) {
      const auto px = Project(f.pose, k, world.points[f.keypoint_point[i]]);
      ASSERT_TRUE(px);
      EXPECT_LT((*px - f.noiseless[i]).norm(), 1e-9);
      EXPECT_EQ(f.features.keypoints.keypoints[i].position, f.noiseless[i]);
      const Eigen::VectorXf d = TextureDescriptor(world.texture_seeds[f.keypoint_point[i]]);
      EXPECT_EQ(Eigen::VectorXf(f.features.keypoints.descriptors.row(i).transpose()), d);
    }
    EXPECT_NO_THROW(f.features.keypoints.Validate(512, k.width, k.height));
  }
}

TEST(RenderFeaturesTest, OutlierFrequency) {
  WorldSpec w;
  w.base_points = 400;
  const World world = GenerateWorld(w);
  SequenceSpec s = FacingCluster(20);
  s.outlier_rate = 0.2;
  s.seed = 5;
  const auto frames = RenderFeatures(world, s, TestIntrinsics());
  double corrupted = 0.0, total = 0.0;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.corrupted.size(); ++i) {
      corrupted += f.corrupted[i];
      total += 1.0;
      const Eigen::VectorXf d = TextureDescriptor(world.texture_seeds[f.keypoint_point[i]]);
      const bool same = Eigen::VectorXf(f.features.keypoints.descriptors.row(i).transpose()) == d;
      EXPECT_EQ(same, !f.corrupted[i]);
    }
  }
  ASSERT_GT(total, 2000);
  EXPECT_NEAR(corrupted / total, 0.2, 0.02);
}

TEST(RenderFeaturesTest, EmptyViewThrows) {
  const World world = GenerateWorld(WorldSpec{});
  SequenceSpec s;
  s.trajectory.push_back(LookAt({0, -8, 0}, {0, -20, 0}));
  EXPECT_THROW(RenderFeatures(world, s, TestIntrinsics()), EmptyView);
}

TEST(CatmullRomTest, PassesThroughControlPoints) {
  PathSpec p;
  p.centers = {{0, -8, 0}, {2, -8, 1}, {4, -7, 0}, {6, -8, 0}};
  p.targets = {Eigen::Vector3d::Zero()};
  p.frames = 31;
  const auto poses = CatmullRomTrajectory(p);
  ASSERT_EQ(poses.size(), 31u);
  EXPECT_LT((poses.front().Center() - p.centers.front()).norm(), 1e-12);
  EXPECT_LT((poses.back().Center() - p.centers.back()).norm(), 1e-12);
  EXPECT_LT((poses[10].Center() - p.centers[1]).norm(), 1e-12);
  EXPECT_LT((poses[20].Center() - p.centers[2]).norm(), 1e-12);
}

TEST(DatasetSpecTest, ParsesAndRejectsUnknownKeys) {
  const std::string good = R"({
    "intrinsics": {"fx": 500, "fy": 500, "cx": 320, "cy": 240, "width": 640, "height": 480},
    "world": {"base_points": 100, "texture_seed": 3},
    "map": {"path": {"centers": [[-2, -8, 0], [2, -8, 0]], "targets": [[0, 0, 0]], "frames": 6}},
    "query": {"path": {"centers": [[-1, -7, 0], [1, -7, 0]], "targets": [[0, 0, 0]], "frames": 4},
              "first_frame_id": 100, "keypoint_noise": 0.5}
  })";
  const DatasetSpec spec = ParseDatasetSpec(good);
  EXPECT_EQ(spec.world.base_points, 100);
  EXPECT_EQ(spec.map.trajectory.size(), 6u);
  EXPECT_EQ(spec.query.first_frame_id, 100);
  EXPECT_EQ(spec.query.keypoint_noise, 0.5);

  std::string bad = good;
  bad.replace(bad.find("\"texture_seed\""), 14, "\"texture_sed\"");
  EXPECT_THROW(ParseDatasetSpec(bad), ValidationError);
  EXPECT_THROW(ParseDatasetSpec("{"), ValidationError);
}

TEST(WriteDatasetTest, Layout) {
  DatasetSpec spec = testing::ExactDatasetSpec();
  spec.map.trajectory.resize(4);
  spec.query.trajectory.resize(3);
  const auto dir = testing::TempDir("synth_layout");
  WriteDataset(dir, spec);
  namespace fs = std::filesystem;
  EXPECT_TRUE(fs::exists(dir / "intrinsics.txt"));
  EXPECT_TRUE(fs::exists(dir / "map" / "poses.txt"));
  EXPECT_TRUE(fs::exists(dir / "gt" / "poses.txt"));
  EXPECT_TRUE(fs::exists(dir / "gt" / "keypoints.tsv"));
  EXPECT_TRUE(fs::exists(dir / "gt" / "points.txt"));
  EXPECT_EQ(ImportFeatureDirectory(dir / "map" / "features").size(), 4u);
  const auto queries = ImportFeatureDirectory(dir / "query" / "features");
  ASSERT_EQ(queries.size(), 3u);
  EXPECT_EQ(queries.begin()->first, spec.query.first_frame_id);
  const Trajectory gt = ReadPoses(dir / "gt" / "poses.txt");
  ASSERT_EQ(gt.size(), 3u);
  EXPECT_EQ(gt.begin()->second.translation(), spec.query.trajectory[0].translation());
}

}  // namespace
}  // namespace anchorloc
