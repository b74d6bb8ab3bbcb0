#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/localizer.h"
#include "anchorloc/parallel.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

using testing::PoseDistance;
using testing::SmallScenario;

struct Fixture {
  testing::Scenario s = SmallScenario(10);
  SceneDatabase db = s.BuildDatabase();
  TemporalParams params;
  RansacParams ransac;
};

Fixture& Small() {
  static Fixture f;
  return f;
}

TEST(GlobalMatchTest, MapFramesLocalizeAtTheirOwnPose) {
  auto& f = Small();
  for (const auto& m : f.s.map) {
    const QueryFrame q = MakeQueryFrame(m.frame_id, m.features);
    const MatchOutcome o = GlobalMatch(q, f.db, f.params, f.s.k, f.ransac);
    ASSERT_EQ(o.failure, MatchFailure::kNone) << ToString(o.failure);
    EXPECT_GE(o.num_inliers(), f.params.min_inliers);
    EXPECT_LT(PoseDistance(o.estimate->pose, m.pose), 1e-6);
  }
}

TEST(GlobalMatchTest, UnmappedSceneIsNotAnchored) {
  auto& f = Small();
  // Same geometry, different textures: nothing matches the map.
  const auto other = SmallScenario(10, 77);
  const QueryFrame q = MakeQueryFrame(500, other.queries[0].features);
  const MatchOutcome o = GlobalMatch(q, f.db, f.params, f.s.k, f.ransac);
  EXPECT_FALSE(o.estimate && o.num_inliers() >= f.params.min_inliers);
  EXPECT_NE(o.failure, MatchFailure::kNone);
}

TEST(TemporalMatchTest, EmptyWindowReportsNoAnchors) {
  auto& f = Small();
  const auto frames = f.s.QueryFrames();
  const LandmarkIndex index(f.db);
  const MatchOutcome o =
      TemporalMatch(frames[0], frames, index, f.params, f.s.k, f.ransac, 1);
  EXPECT_EQ(o.failure, MatchFailure::kNoAnchorsInWindow);
  EXPECT_FALSE(o.estimate);
}

TEST(TemporalMatchTest, PropagatesFromAnchoredNeighbour) {
  auto& f = Small();
  auto frames = f.s.QueryFrames();
  const LandmarkIndex index(f.db);
  const MatchOutcome g = GlobalMatch(frames[1], f.db, f.params, f.s.k, f.ransac);
  ASSERT_EQ(g.failure, MatchFailure::kNone);
  CommitAnchor(frames[1], *g.estimate, AnchorSource::kGlobal, 0, g.links, index, f.s.k,
               f.ransac.inlier_threshold);
  TemporalParams p = f.params;
  p.min_inliers = 20;
  const MatchOutcome o = TemporalMatch(frames[2], frames, index, p, f.s.k, f.ransac, 1);
  ASSERT_EQ(o.failure, MatchFailure::kNone) << ToString(o.failure);
  EXPECT_LT(PoseDistance(o.estimate->pose, f.s.queries[2].pose), 1e-6);

  // Outside the window the same neighbour is invisible.
  p.window = 2;
  const MatchOutcome far = TemporalMatch(frames[3], frames, index, p, f.s.k, f.ransac, 1);
  EXPECT_EQ(far.failure, MatchFailure::kNoAnchorsInWindow);
}

TEST(AssociateKeypointsTest, KeepsOnlyPoseConsistentLinks) {
  auto& f = Small();
  auto frames = f.s.QueryFrames();
  const LandmarkIndex index(f.db);
  const MatchOutcome g = GlobalMatch(frames[0], f.db, f.params, f.s.k, f.ransac);
  ASSERT_EQ(g.failure, MatchFailure::kNone);
  CommitAnchor(frames[0], *g.estimate, AnchorSource::kGlobal, 0, g.links, index, f.s.k,
               f.ransac.inlier_threshold);
  const auto& q = frames[0];
  ASSERT_EQ(q.kp_landmark.size(), q.keypoints.size());
  int associated = 0;
  for (std::size_t i = 0; i < q.kp_landmark.size(); ++i) {
    if (!q.kp_landmark[i]) continue;
    ++associated;
    const Point3* x = index.Find(*q.kp_landmark[i]);
    ASSERT_NE(x, nullptr);
    const auto px = Project(q.anchor->pose, f.s.k, *x);
    ASSERT_TRUE(px);
    EXPECT_LE((*px - q.keypoints.keypoints[i].position).norm(), f.ransac.inlier_threshold);
  }
  EXPECT_GE(associated, q.anchor->num_inliers);
}

TEST(TemporalRoundTest, OutcomesIndependentOfVisitOrder) {
  auto& f = Small();
  auto frames = f.s.QueryFrames();
  const LandmarkIndex index(f.db);
  const MatchOutcome g = GlobalMatch(frames[2], f.db, f.params, f.s.k, f.ransac);
  ASSERT_EQ(g.failure, MatchFailure::kNone);
  CommitAnchor(frames[2], *g.estimate, AnchorSource::kGlobal, 0, g.links, index, f.s.k,
               f.ransac.inlier_threshold);
  TemporalParams p = f.params;
  p.min_inliers = 20;
  const std::vector<std::size_t> forward = {0, 1, 2, 3, 4};
  const std::vector<std::size_t> backward = {4, 3, 2, 1, 0};
  const auto a = TemporalRound(frames, index, p, f.s.k, f.ransac, 1, forward);
  const auto b = TemporalRound(frames, index, p, f.s.k, f.ransac, 1, backward);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].has_value(), b[i].has_value());
    if (!a[i]) continue;
    EXPECT_EQ(a[i]->failure, b[i]->failure);
    ASSERT_EQ(a[i]->estimate.has_value(), b[i]->estimate.has_value());
    if (a[i]->estimate) {
      EXPECT_EQ(a[i]->estimate->pose.translation(), b[i]->estimate->pose.translation());
      EXPECT_EQ(a[i]->estimate->inlier_mask, b[i]->estimate->inlier_mask);
    }
  }
  EXPECT_FALSE(a[2]);  // already anchored
}

TEST(LocalizeSequenceTest, AllGlobalStopsAfterOneRound) {
  auto& f = Small();
  const auto r = LocalizeSequence(f.s.QueryFrames(), f.db, f.params, f.s.k, f.ransac);
  EXPECT_EQ(r.NumAnchored(), f.s.queries.size());
  EXPECT_EQ(r.rounds, 1);
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    EXPECT_EQ(r.frames[i].source, AnchorSource::kGlobal);
    EXPECT_LT(PoseDistance(r.frames[i].anchor->pose, f.s.queries[i].pose), 1e-6);
  }
}

TEST(LocalizeSequenceTest, TemporalRoundsAnchorWhatGlobalMissed) {
  // One query sees the map well; its neighbours only weakly. A high global
  // floor for everyone but the temporal stage still reaches them.
  auto& f = Small();
  TemporalParams p = f.params;
  p.n_r = 1;
  p.min_inliers = 150;
  const auto global_only =
      LocalizeSequence(f.s.QueryFrames(), f.db, p, f.s.k, f.ransac, false);
  const auto full = LocalizeSequence(f.s.QueryFrames(), f.db, p, f.s.k, f.ransac);
  EXPECT_GE(full.NumAnchored(), global_only.NumAnchored());
  EXPECT_EQ(global_only.rounds, 0);
  for (const auto& q : full.frames) {
    if (!q.anchored()) continue;
    EXPECT_EQ(q.round == 0, q.source == AnchorSource::kGlobal);
    EXPECT_GE(q.anchor->num_inliers, p.min_inliers);
  }
}

TEST(LocalizeSequenceTest, DeterministicAcrossThreadCounts) {
  auto& f = Small();
  const int saved = NumThreads();
  SetNumThreads(1);
  const auto a = LocalizeSequence(f.s.QueryFrames(), f.db, f.params, f.s.k, f.ransac);
  SetNumThreads(3);
  const auto b = LocalizeSequence(f.s.QueryFrames(), f.db, f.params, f.s.k, f.ransac);
  SetNumThreads(saved);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    ASSERT_EQ(a.frames[i].anchored(), b.frames[i].anchored());
    if (!a.frames[i].anchored()) continue;
    EXPECT_EQ(a.frames[i].anchor->pose.rotation().coeffs(),
              b.frames[i].anchor->pose.rotation().coeffs());
    EXPECT_EQ(a.frames[i].anchor->pose.translation(), b.frames[i].anchor->pose.translation());
    EXPECT_EQ(a.frames[i].kp_landmark, b.frames[i].kp_landmark);
  }
}

TEST(LocalizeSequenceTest, Validation) {
  auto& f = Small();
  TemporalParams p = f.params;
  p.iterations = 0;
  EXPECT_THROW(LocalizeSequence(f.s.QueryFrames(), f.db, p, f.s.k, f.ransac), InvalidArgument);
  p = f.params;
  p.window = 3;
  EXPECT_THROW(LocalizeSequence(f.s.QueryFrames(), f.db, p, f.s.k, f.ransac), InvalidArgument);
  auto frames = f.s.QueryFrames();
  std::swap(frames[0], frames[1]);
  EXPECT_THROW(LocalizeSequence(frames, f.db, f.params, f.s.k, f.ransac), InvalidArgument);
  EXPECT_THROW(LocalizeSequence(f.s.QueryFrames(), SceneDatabase(), f.params, f.s.k, f.ransac),
               EmptyDatabase);
}

TEST(AttemptSeedTest, DependsOnFrameAndRoundOnly) {
  EXPECT_EQ(AttemptSeed(1, 5, 2), AttemptSeed(1, 5, 2));
  EXPECT_NE(AttemptSeed(1, 5, 2), AttemptSeed(1, 5, 3));
  EXPECT_NE(AttemptSeed(1, 5, 2), AttemptSeed(1, 6, 2));
  EXPECT_NE(AttemptSeed(1, 5, 2), AttemptSeed(2, 5, 2));
}

}  // namespace
}  // namespace anchorloc
