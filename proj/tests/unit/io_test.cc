#include <fstream>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/feature_file.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/pose_io.h"
#include "anchorloc/random.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::TempDir;

FrameFeatures RandomFeatures(std::uint64_t seed, int n, int dim, int global_dim) {
  Rng rng(seed);
  FrameFeatures f;
  f.keypoints.keypoints.resize(n);
  f.keypoints.descriptors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    f.keypoints.keypoints[i].position = Pixel(static_cast<float>(rng.Uniform(0, 640)),
                                              static_cast<float>(rng.Uniform(0, 480)));
    f.keypoints.keypoints[i].score = static_cast<float>(rng.Uniform());
    for (int j = 0; j < dim; ++j) f.keypoints.descriptors(i, j) = static_cast<float>(rng.Normal());
  }
  f.global.values.resize(global_dim);
  for (int j = 0; j < global_dim; ++j) f.global.values(j) = static_cast<float>(rng.Normal());
  return f;
}

void ExpectSame(const FrameFeatures& a, const FrameFeatures& b) {
  ASSERT_EQ(a.keypoints.size(), b.keypoints.size());
  for (std::size_t i = 0; i < a.keypoints.size(); ++i) {
    EXPECT_EQ(a.keypoints.keypoints[i].position, b.keypoints.keypoints[i].position);
    EXPECT_EQ(a.keypoints.keypoints[i].score, b.keypoints.keypoints[i].score);
  }
  EXPECT_EQ(a.keypoints.descriptors, b.keypoints.descriptors);
  EXPECT_EQ(a.global.values, b.global.values);
}

TEST(PoseIoTest, LineRoundTripIsExact) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Pose p(QuaternionExp(Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal())),
                 Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal()));
    const auto [id, q] = ParsePoseLine(FormatPoseLine(i, p));
    EXPECT_EQ(id, i);
    EXPECT_EQ(q.rotation().coeffs(), p.rotation().coeffs());
    EXPECT_EQ(q.translation(), p.translation());
  }
}

TEST(PoseIoTest, FileRoundTrip) {
  const auto dir = TempDir("poses");
  Trajectory t;
  t[3] = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitY())),
              Eigen::Vector3d(1, 2, 3));
  t[7] = Pose();
  WritePoses(dir / "p.txt", t);
  const Trajectory back = ReadPoses(dir / "p.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at(3).translation(), t[3].translation());
  EXPECT_EQ(back.at(3).rotation().coeffs(), t[3].rotation().coeffs());
}

TEST(PoseIoTest, MalformedLinesReportLine) {
  EXPECT_THROW(ParsePoseLine("1 1 0 0"), FormatError);
  EXPECT_THROW(ParsePoseLine("1 0 0 0 0 1 2 3"), FormatError);  // zero quaternion
  EXPECT_THROW(ParsePoseLine("1 1 0 0 0 1 2 3 9"), FormatError);
  const auto dir = TempDir("poses_bad");
  std::ofstream(dir / "p.txt") << "# header\n1 1 0 0 0 0 0 0\n1 1 0 0 0 0 0 0\n";
  try {
    ReadPoses(dir / "p.txt");
    FAIL() << "duplicate id accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
  EXPECT_THROW(ReadPoses(dir / "missing.txt"), IoError);
}

TEST(PoseIoTest, IntrinsicsRoundTrip) {
  const auto dir = TempDir("intrinsics");
  const CameraIntrinsics k{512.5, 511.0, 320.25, 239.75, 640, 480};
  WriteIntrinsics(dir / "k.txt", k);
  const CameraIntrinsics r = ReadIntrinsics(dir / "k.txt");
  EXPECT_EQ(r.fx, k.fx);
  EXPECT_EQ(r.fy, k.fy);
  EXPECT_EQ(r.cx, k.cx);
  EXPECT_EQ(r.cy, k.cy);
  EXPECT_EQ(r.width, k.width);
  EXPECT_EQ(r.height, k.height);
}

TEST(FeatureFileTest, RoundTripIsBitExact) {
  const auto dir = TempDir("features");
  const FrameFeatures f = RandomFeatures(12, 37, 128, 256);
  ExportFeatures(dir / FeatureFileName(5), f);
  ExpectSame(ImportFeatures(dir / FeatureFileName(5)), f);
}

TEST(FeatureFileTest, TruncatedFileIsFormatError) {
  auto bytes = EncodeFeatures(RandomFeatures(13, 10, 128, 256));
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
    EXPECT_THROW(DecodeFeatures(part), FormatError) << cut;
  }
  bytes.push_back(0);
  EXPECT_THROW(DecodeFeatures(bytes), FormatError);
}

TEST(FeatureFileTest, HandBuiltWideDescriptorsAccepted) {
  // Magic, version 1, 2 keypoints, width 256, no global descriptor.
  std::vector<std::uint8_t> bytes = {'A', 'F', 'E', 'A'};
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto f32 = [&](float v) { u32(std::bit_cast<std::uint32_t>(v)); };
  u32(1);
  u32(2);
  u32(256);
  u32(0);
  f32(10.5f), f32(20.0f), f32(0.5f);
  f32(30.0f), f32(40.25f), f32(1.0f);
  for (int i = 0; i < 2 * 256; ++i) f32(static_cast<float>(i));
  const FrameFeatures f = DecodeFeatures(bytes);
  EXPECT_EQ(f.keypoints.descriptor_dim(), 256);
  EXPECT_EQ(f.keypoints.size(), 2u);
  EXPECT_EQ(f.keypoints.keypoints[1].position, Pixel(30.0, 40.25));
  EXPECT_EQ(f.keypoints.descriptors(1, 255), 511.0f);
  EXPECT_EQ(EncodeFeatures(f), bytes);
}

TEST(FeatureFileTest, DirectoryRejectsMixedWidths) {
  const auto dir = TempDir("features_mixed");
  ExportFeatures(dir / FeatureFileName(1), RandomFeatures(1, 5, 128, 8));
  ExportFeatures(dir / FeatureFileName(2), RandomFeatures(2, 5, 64, 8));
  EXPECT_THROW(ImportFeatureDirectory(dir), DimensionMismatch);
}

TEST(LandmarkFileTest, RoundTrip) {
  const auto dir = TempDir("landmarks");
  LandmarkTable t;
  t[4] = {4, Point3(0.1, -2.0, 3.5), {{10, 3}, {11, 7}}, 0.25};
  t[9] = {9, Point3(1e-9, 2e9, -7.0), {{12, 0}, {13, 1}, {15, 2}}, 0.0};
  WriteLandmarks(dir / "l.bin", t);
  const LandmarkTable r = ReadLandmarks(dir / "l.bin");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.at(9).position, t[9].position);
  EXPECT_EQ(r.at(9).observations, t[9].observations);
  EXPECT_EQ(r.at(4).observations, t[4].observations);
}

TEST(LandmarkFileTest, CorruptMagic) {
  const auto dir = TempDir("landmarks_bad");
  std::ofstream(dir / "l.bin", std::ios::binary) << "XXXXXXXXXXXX";
  EXPECT_THROW(ReadLandmarks(dir / "l.bin"), FormatError);
}

}  // namespace
}  // namespace anchorloc
