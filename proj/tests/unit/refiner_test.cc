#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/refiner.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::PoseDistance;
using testing::SmallScenario;

struct Fixture {
  testing::Scenario s = SmallScenario(10);
  SceneDatabase db = s.BuildDatabase();
  RansacParams ransac;
  LocalizationResult localized =
      LocalizeSequence(s.QueryFrames(), db, TemporalParams{}, s.k, ransac);
};

Fixture& Small() {
  static Fixture f;
  return f;
}

void Unanchor(QueryFrame& q, bool drop_map_links) {
  q.anchor.reset();
  q.kp_landmark.assign(q.keypoints.size(), std::nullopt);
  if (drop_map_links) q.global_links.clear();
}

TEST(RefineAllTest, RegistersCovisibleFrameFromNeighbours) {
  auto& f = Small();
  ASSERT_EQ(f.localized.NumAnchored(), f.s.queries.size());
  for (bool bundle_adjust : {false, true}) {
    auto frames = f.localized.frames;
    Unanchor(frames[2], true);
    RefineParams p;
    p.bundle_adjust = bundle_adjust;
    const RefineResult r = RefineAll(frames, f.db, f.s.k, p, f.ransac);
    EXPECT_EQ(r.registered, 1);
    EXPECT_EQ(r.provenance.at(frames[2].frame_id), Provenance::kRefined);
    ASSERT_TRUE(r.poses.count(frames[2].frame_id));
    EXPECT_LT(PoseDistance(r.poses.at(frames[2].frame_id), f.s.queries[2].pose), 1e-6);
    EXPECT_FALSE(r.frames[2].anchored());
    EXPECT_NO_THROW(CheckAugmentedConsistency(f.db, r));
  }
}

TEST(RefineAllTest, FrameWithoutLandmarksStaysUnlocalized) {
  auto& f = Small();
  auto frames = f.localized.frames;
  // A frame of a differently textured scene: nothing to register against.
  const auto other = SmallScenario(10, 77);
  QueryFrame stranger = MakeQueryFrame(frames.back().frame_id + 1, other.queries[0].features);
  frames.push_back(stranger);
  const RefineResult r = RefineAll(frames, f.db, f.s.k, RefineParams{}, f.ransac);
  EXPECT_EQ(r.provenance.at(stranger.frame_id), Provenance::kUnlocalized);
  EXPECT_FALSE(r.poses.count(stranger.frame_id));
  EXPECT_EQ(r.provenance.size(), frames.size());
}

TEST(RefineAllTest, AnchorsAndMapAreNeverMoved) {
  auto& f = Small();
  auto frames = f.localized.frames;
  Unanchor(frames[1], false);
  Unanchor(frames[3], true);
  const RefineResult r = RefineAll(frames, f.db, f.s.k, RefineParams{}, f.ransac);
  for (const auto& q : frames) {
    if (!q.anchored()) continue;
    const Pose& p = r.poses.at(q.frame_id);
    EXPECT_EQ(p.rotation().coeffs(), q.anchor->pose.rotation().coeffs());
    EXPECT_EQ(p.translation(), q.anchor->pose.translation());
  }
  for (const auto& [id, lm] : r.new_landmarks) EXPECT_EQ(f.db.FindLandmark(id), nullptr);
}

TEST(RefineAllTest, FullyAnchoredInputRegistersNothing) {
  auto& f = Small();
  const RefineResult r = RefineAll(f.localized.frames, f.db, f.s.k, RefineParams{}, f.ransac);
  EXPECT_EQ(r.registered, 0);
  EXPECT_EQ(r.passes, 1);
  for (const auto& q : f.localized.frames) {
    EXPECT_EQ(r.provenance.at(q.frame_id), Provenance::kAnchorGlobal);
    EXPECT_EQ(r.poses.at(q.frame_id).translation(), q.anchor->pose.translation());
  }
}

TEST(CheckAugmentedConsistencyTest, DetectsBrokenReferences) {
  auto& f = Small();
  auto frames = f.localized.frames;
  Unanchor(frames[2], true);
  RefineResult r = RefineAll(frames, f.db, f.s.k, RefineParams{}, f.ransac);
  ASSERT_NO_THROW(CheckAugmentedConsistency(f.db, r));
  // A keypoint pointing at a landmark that exists nowhere.
  RefineResult bad = r;
  const LandmarkId unknown = f.db.landmarks().rbegin()->first + 1000000;
  bad.frames[2].kp_landmark[0] = unknown;
  EXPECT_THROW(CheckAugmentedConsistency(f.db, bad), ValidationError);
  // Association table out of step with the keypoints.
  bad = r;
  bad.frames[1].kp_landmark.pop_back();
  EXPECT_THROW(CheckAugmentedConsistency(f.db, bad), ValidationError);
}

TEST(ProvenanceTest, TagsRoundTrip) {
  for (auto p : {Provenance::kAnchorGlobal, Provenance::kAnchorTemporal, Provenance::kRefined,
                 Provenance::kUnlocalized}) {
    EXPECT_EQ(ParseProvenance(ToString(p)), p);
  }
  EXPECT_THROW(ParseProvenance("bogus"), InvalidArgument);
}

TEST(RefineParamsTest, Validation) {
  RefineParams p;
  p.min_register_inliers = 3;
  EXPECT_THROW(p.Validate(), InvalidArgument);
}

}  // namespace
}  // namespace anchorloc
