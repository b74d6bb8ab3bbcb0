#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anchorloc/features.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/pnp.h"

namespace anchorloc {

struct TemporalParams {
  int n_r = 30;
  int window = 30;  // L; frames q - L/2 .. q + L/2 are neighbours
  int iterations = 10;
  int min_inliers = 50;  // s
  double ratio = kDefaultRatio;
  // Once anchored, a frame is also matched against this many map frames
  // nearest its pose to complete its keypoint associations. 0 disables.
  int guided_frames = 5;

  // Throws InvalidArgument: L >= 2 and even, iterations >= 1, s >= 4.
  void Validate() const;
};

enum class AnchorSource { kGlobal, kTemporal };

// A possible 2D-3D association of a query keypoint.
struct LandmarkLink {
  int keypoint = 0;
  LandmarkId landmark = 0;
  double score = 0.0;
};

struct QueryFrame {
  FrameId frame_id = 0;
  KeypointSet keypoints;
  GlobalDescriptor global;

  // Set iff the frame is anchored (num_inliers >= s).
  std::optional<PoseEstimate> anchor;
  AnchorSource source = AnchorSource::kGlobal;
  int round = 0;  // 0 = global matching, r >= 1 = temporal round r
  std::vector<std::optional<LandmarkId>> kp_landmark;

  // Every association proposed by matching against retrieved map frames.
  std::vector<LandmarkLink> global_links;
  // Best estimate that failed the inlier gate; never trusted as an anchor.
  std::optional<Pose> candidate;
  int candidate_inliers = 0;

  bool anchored() const { return anchor.has_value(); }
};

QueryFrame MakeQueryFrame(FrameId id, FrameFeatures features);

// Resolves landmark ids against the reference map plus an optional table of
// landmarks added after map building.
class LandmarkIndex {
 public:
  explicit LandmarkIndex(const SceneDatabase& db, const LandmarkTable* extra = nullptr)
      : db_(&db), extra_(extra) {}
  const Point3* Find(LandmarkId id) const;

 private:
  const SceneDatabase* db_;
  const LandmarkTable* extra_;
};

enum class MatchFailure {
  kNone,
  kNoConsensus,
  kNoAnchorsInWindow,
  kTooFewCorrespondences,  // fewer than 4 after deduplication
  kBelowInlierThreshold,
};

std::string ToString(MatchFailure failure);

struct MatchOutcome {
  std::optional<PoseEstimate> estimate;
  // Deduplicated input of the PnP solve, ordered by query keypoint, and the
  // keypoint each correspondence belongs to.
  std::vector<Correspondence2D3D> correspondences;
  std::vector<int> keypoints;
  // All proposed associations before deduplication.
  std::vector<LandmarkLink> links;
  MatchFailure failure = MatchFailure::kNone;

  int num_inliers() const { return estimate ? estimate->num_inliers : 0; }
};

// One correspondence per query keypoint: the highest scoring link, earliest
// link on ties.
void DeduplicateLinks(const std::vector<LandmarkLink>& links, const QueryFrame& query,
                      const LandmarkIndex& landmarks, MatchOutcome* outcome);

MatchOutcome GlobalMatch(const QueryFrame& query, const SceneDatabase& db,
                         const TemporalParams& params, const CameraIntrinsics& k,
                         const RansacParams& ransac);

// Matches against anchored frames of `frames` within the window. `frames`
// is the round snapshot and must be sorted by frame id.
// Links from the map frames nearest `pose` (see TemporalParams::guided_frames).
std::vector<LandmarkLink> GuidedLinks(const QueryFrame& query, const Pose& pose,
                                      const SceneDatabase& db, const TemporalParams& params);

MatchOutcome TemporalMatch(const QueryFrame& query, std::span<const QueryFrame> frames,
                           const LandmarkIndex& landmarks, const TemporalParams& params,
                           const CameraIntrinsics& k, const RansacParams& ransac, int round);

// Sets kp_landmark to, for every keypoint, the proposed landmark that best
// agrees with `pose` (reprojection within the inlier threshold); keypoints
// without such a proposal are cleared.
void AssociateKeypoints(QueryFrame& frame, const Pose& pose,
                        std::span<const LandmarkLink> links, const LandmarkIndex& landmarks,
                        const CameraIntrinsics& k, double inlier_threshold);

// Marks the frame anchored and associates its keypoints as above.
void CommitAnchor(QueryFrame& frame, const PoseEstimate& estimate, AnchorSource source,
                  int round, std::span<const LandmarkLink> links,
                  const LandmarkIndex& landmarks, const CameraIntrinsics& k,
                  double inlier_threshold);

// Per-attempt entry of the localization log.
struct AttemptRecord {
  FrameId frame_id = 0;
  std::string stage;  // "global" or "temporal"
  int round = 0;
  int num_correspondences = 0;
  int num_inliers = 0;
  bool anchored = false;
  MatchFailure failure = MatchFailure::kNone;
  std::optional<Pose> pose;
  double mean_inlier_error = 0.0;
};

// Temporal matching of every unanchored frame against the snapshot, visited
// in `order` (indices into frames; all frames when empty). Pure: frames are
// not modified. Outcomes are indexed like `frames`.
std::vector<std::optional<MatchOutcome>> TemporalRound(
    std::span<const QueryFrame> frames, const LandmarkIndex& landmarks,
    const TemporalParams& params, const CameraIntrinsics& k, const RansacParams& ransac,
    int round, std::span<const std::size_t> order = {});

struct LocalizationResult {
  std::vector<QueryFrame> frames;
  std::vector<AttemptRecord> log;
  int rounds = 0;  // temporal rounds executed

  std::size_t NumAnchored() const;
};

// Phase 1 global matching of every frame, then up to `iterations` temporal
// rounds with anchors committed between rounds. With temporal == false only
// phase 1 runs.
LocalizationResult LocalizeSequence(std::vector<QueryFrame> queries, const SceneDatabase& db,
                                    const TemporalParams& params, const CameraIntrinsics& k,
                                    const RansacParams& ransac, bool temporal = true);

// Per-stage RANSAC seed; independent of processing order.
std::uint64_t AttemptSeed(std::uint64_t base, FrameId frame, int round);

}  // namespace anchorloc
