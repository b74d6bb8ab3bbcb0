#include "anchorloc/localizer.h"

#include <algorithm>
#include <numeric>

#include "anchorloc/errors.h"
#include "anchorloc/parallel.h"
#include "anchorloc/random.h"

namespace anchorloc {
namespace {

void Solve(const QueryFrame& query, const LandmarkIndex& landmarks,
           const CameraIntrinsics& k, const RansacParams& ransac, int min_inliers,
           std::uint64_t seed, MatchOutcome* out) {
  DeduplicateLinks(out->links, query, landmarks, out);
  if (out->correspondences.size() < 4) {
    out->failure = MatchFailure::kTooFewCorrespondences;
    return;
  }
  RansacParams p = ransac;
  p.seed = seed;
  out->estimate = EstimatePoseRansac(out->correspondences, k, p);
  if (!out->estimate) {
    out->failure = MatchFailure::kNoConsensus;
  } else if (out->estimate->num_inliers < min_inliers) {
    out->failure = MatchFailure::kBelowInlierThreshold;
  }
}

AttemptRecord Record(const QueryFrame& f, const MatchOutcome& o, const char* stage,
                     int round, bool anchored) {
  AttemptRecord r;
  r.frame_id = f.frame_id;
  r.stage = stage;
  r.round = round;
  r.num_correspondences = static_cast<int>(o.correspondences.size());
  r.num_inliers = o.num_inliers();
  r.anchored = anchored;
  r.failure = o.failure;
  if (o.estimate) {
    r.pose = o.estimate->pose;
    r.mean_inlier_error = o.estimate->mean_inlier_error;
  }
  return r;
}

void KeepCandidate(QueryFrame& f, const MatchOutcome& o) {
  if (o.estimate && o.estimate->num_inliers > f.candidate_inliers) {
    f.candidate = o.estimate->pose;
    f.candidate_inliers = o.estimate->num_inliers;
  }
}

}  // namespace

void TemporalParams::Validate() const {
  if (n_r < 1) throw InvalidArgument("n_r must be >= 1");
  if (window < 2 || window % 2 != 0) throw InvalidArgument("window must be even and >= 2");
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (min_inliers < 4) throw InvalidArgument("min_inliers must be >= 4");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must be in (0, 1]");
  if (guided_frames < 0) throw InvalidArgument("guided_frames must be >= 0");
}

QueryFrame MakeQueryFrame(FrameId id, FrameFeatures features) {
  QueryFrame q;
  q.frame_id = id;
  q.keypoints = std::move(features.keypoints);
  q.global = std::move(features.global);
  q.kp_landmark.assign(q.keypoints.size(), std::nullopt);
  return q;
}

const Point3* LandmarkIndex::Find(LandmarkId id) const {
  if (const Landmark* lm = db_->FindLandmark(id)) return &lm->position;
  if (extra_ != nullptr) {
    auto it = extra_->find(id);
    if (it != extra_->end()) return &it->second.position;
  }
  return nullptr;
}

std::string ToString(MatchFailure failure) {
  switch (failure) {
    case MatchFailure::kNone: return "none";
    case MatchFailure::kNoConsensus: return "no-consensus";
    case MatchFailure::kNoAnchorsInWindow: return "no-anchors-in-window";
    case MatchFailure::kTooFewCorrespondences: return "too-few-correspondences";
    case MatchFailure::kBelowInlierThreshold: return "below-inlier-threshold";
  }
  return "unknown";
}

std::uint64_t AttemptSeed(std::uint64_t base, FrameId frame, int round) {
  return MixSeed(MixSeed(base, static_cast<std::uint64_t>(frame)),
                 static_cast<std::uint64_t>(round));
}

void DeduplicateLinks(const std::vector<LandmarkLink>& links, const QueryFrame& query,
                      const LandmarkIndex& landmarks, MatchOutcome* outcome) {
  std::vector<int> best(query.keypoints.size(), -1);
  for (int i = 0; i < static_cast<int>(links.size()); ++i) {
    const auto& l = links[i];
    if (landmarks.Find(l.landmark) == nullptr) continue;
    int& b = best[l.keypoint];
    if (b < 0 || l.score > links[b].score) b = i;
  }
  outcome->correspondences.clear();
  outcome->keypoints.clear();
  for (int kp = 0; kp < static_cast<int>(best.size()); ++kp) {
    if (best[kp] < 0) continue;
    const auto& l = links[best[kp]];
    Correspondence2D3D c;
    c.pixel = query.keypoints.keypoints[kp].position;
    c.point = *landmarks.Find(l.landmark);
    c.landmark_id = l.landmark;
    c.score = l.score;
    outcome->correspondences.push_back(c);
    outcome->keypoints.push_back(kp);
  }
}

MatchOutcome GlobalMatch(const QueryFrame& query, const SceneDatabase& db,
                         const TemporalParams& params, const CameraIntrinsics& k,
                         const RansacParams& ransac) {
  MatchOutcome out;
  if (query.keypoints.empty()) {
    out.failure = MatchFailure::kTooFewCorrespondences;
    return out;
  }
  for (FrameId id : db.Retrieve(query.global, params.n_r)) {
    const MapFrame& mf = *db.FindFrame(id);
    if (mf.keypoints.empty()) continue;
    for (const auto& m : MatchKeypoints(query.keypoints, mf.keypoints, params.ratio)) {
      if (const auto& lid = mf.point_ids[m.j]) out.links.push_back({m.i, *lid, m.score});
    }
  }
  Solve(query, LandmarkIndex(db), k, ransac, params.min_inliers,
        AttemptSeed(ransac.seed, query.frame_id, 0), &out);
  return out;
}

std::vector<LandmarkLink> GuidedLinks(const QueryFrame& query, const Pose& pose,
                                      const SceneDatabase& db, const TemporalParams& params) {
  std::vector<LandmarkLink> links;
  if (params.guided_frames == 0 || query.keypoints.empty()) return links;
  const Eigen::Vector3d c = pose.Center();
  const Eigen::Vector3d axis = (pose.rotation().conjugate() * Eigen::Vector3d::UnitZ());
  // Map frames facing roughly the same way (< 60 degrees), nearest first.
  std::vector<std::pair<double, std::size_t>> near;
  const auto& frames = db.frames();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Pose& p = frames[i].pose;
    if (axis.dot((p.rotation().conjugate() * Eigen::Vector3d::UnitZ())) < 0.5) continue;
    near.emplace_back((p.Center() - c).squaredNorm(), i);
  }
  const auto n = std::min<std::size_t>(near.size(), params.guided_frames);
  std::partial_sort(near.begin(), near.begin() + n, near.end());
  for (std::size_t i = 0; i < n; ++i) {
    const MapFrame& mf = frames[near[i].second];
    if (mf.keypoints.empty()) continue;
    for (const auto& m : MatchKeypoints(query.keypoints, mf.keypoints, params.ratio)) {
      if (const auto& lid = mf.point_ids[m.j]) links.push_back({m.i, *lid, m.score});
    }
  }
  return links;
}

MatchOutcome TemporalMatch(const QueryFrame& query, std::span<const QueryFrame> frames,
                           const LandmarkIndex& landmarks, const TemporalParams& params,
                           const CameraIntrinsics& k, const RansacParams& ransac, int round) {
  MatchOutcome out;
  const FrameId half = params.window / 2;
  auto lo = std::lower_bound(frames.begin(), frames.end(), query.frame_id - half,
                             [](const QueryFrame& f, FrameId id) { return f.frame_id < id; });
  bool any_anchor = false;
  for (auto it = lo; it != frames.end() && it->frame_id <= query.frame_id + half; ++it) {
    if (it->frame_id == query.frame_id || !it->anchored()) continue;
    any_anchor = true;
    if (query.keypoints.empty() || it->keypoints.empty()) continue;
    for (const auto& m : MatchKeypoints(query.keypoints, it->keypoints, params.ratio)) {
      if (const auto& lid = it->kp_landmark[m.j]) out.links.push_back({m.i, *lid, m.score});
    }
  }
  if (!any_anchor) {
    out.failure = MatchFailure::kNoAnchorsInWindow;
    return out;
  }
  Solve(query, landmarks, k, ransac, params.min_inliers,
        AttemptSeed(ransac.seed, query.frame_id, round), &out);
  return out;
}

void AssociateKeypoints(QueryFrame& frame, const Pose& pose,
                        std::span<const LandmarkLink> links, const LandmarkIndex& landmarks,
                        const CameraIntrinsics& k, double inlier_threshold) {
  frame.kp_landmark.assign(frame.keypoints.size(), std::nullopt);
  std::vector<double> best_error(frame.keypoints.size(), inlier_threshold);
  Eigen::Vector2d r;
  for (const auto& l : links) {
    const Point3* x = landmarks.Find(l.landmark);
    if (x == nullptr) continue;
    if (!ReprojectionResidual(pose, k, *x, frame.keypoints.keypoints[l.keypoint].position,
                              &r)) {
      continue;
    }
    // Strictly better wins; the threshold itself is still an inlier.
    const double e = r.norm();
    if (e < best_error[l.keypoint] ||
        (e == inlier_threshold && !frame.kp_landmark[l.keypoint])) {
      best_error[l.keypoint] = e;
      frame.kp_landmark[l.keypoint] = l.landmark;
    }
  }
}

void CommitAnchor(QueryFrame& frame, const PoseEstimate& estimate, AnchorSource source,
                  int round, std::span<const LandmarkLink> links,
                  const LandmarkIndex& landmarks, const CameraIntrinsics& k,
                  double inlier_threshold) {
  frame.anchor = estimate;
  frame.source = source;
  frame.round = round;
  AssociateKeypoints(frame, estimate.pose, links, landmarks, k, inlier_threshold);
}

std::vector<std::optional<MatchOutcome>> TemporalRound(
    std::span<const QueryFrame> frames, const LandmarkIndex& landmarks,
    const TemporalParams& params, const CameraIntrinsics& k, const RansacParams& ransac,
    int round, std::span<const std::size_t> order) {
  std::vector<std::size_t> visit(order.begin(), order.end());
  if (visit.empty()) {
    visit.resize(frames.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
  }
  std::vector<std::optional<MatchOutcome>> outcomes(frames.size());
  ParallelFor(visit.size(), [&](std::size_t n) {
    const std::size_t i = visit[n];
    if (frames[i].anchored()) return;
    outcomes[i] = TemporalMatch(frames[i], frames, landmarks, params, k, ransac, round);
  });
  return outcomes;
}

std::size_t LocalizationResult::NumAnchored() const {
  return static_cast<std::size_t>(std::count_if(
      frames.begin(), frames.end(), [](const QueryFrame& f) { return f.anchored(); }));
}

LocalizationResult LocalizeSequence(std::vector<QueryFrame> queries, const SceneDatabase& db,
                                    const TemporalParams& params, const CameraIntrinsics& k,
                                    const RansacParams& ransac, bool temporal) {
  params.Validate();
  ransac.Validate();
  k.Validate();
  if (db.empty()) throw EmptyDatabase("localization against an empty database");
  for (std::size_t i = 1; i < queries.size(); ++i) {
    if (queries[i].frame_id <= queries[i - 1].frame_id) {
      throw InvalidArgument("query frames must be sorted by strictly increasing id");
    }
  }
  LocalizationResult result;
  result.frames = std::move(queries);
  auto& frames = result.frames;
  const LandmarkIndex landmarks(db);

  std::vector<MatchOutcome> global(frames.size());
  ParallelFor(frames.size(), [&](std::size_t i) {
    global[i] = GlobalMatch(frames[i], db, params, k, ransac);
  });
  std::vector<std::vector<LandmarkLink>> guided(frames.size());
  ParallelFor(frames.size(), [&](std::size_t i) {
    if (global[i].failure != MatchFailure::kNone) return;
    guided[i] = GuidedLinks(frames[i], global[i].estimate->pose, db, params);
  });
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto& f = frames[i];
    auto& o = global[i];
    const bool anchored = o.failure == MatchFailure::kNone;
    f.global_links = std::move(o.links);
    if (anchored) {
      guided[i].insert(guided[i].end(), f.global_links.begin(), f.global_links.end());
      CommitAnchor(f, *o.estimate, AnchorSource::kGlobal, 0, guided[i], landmarks, k,
                   ransac.inlier_threshold);
    } else {
      KeepCandidate(f, o);
    }
    result.log.push_back(Record(f, o, "global", 0, anchored));
  }
  if (!temporal) return result;

  for (int round = 1; round <= params.iterations; ++round) {
    result.rounds = round;
    auto outcomes = TemporalRound(frames, landmarks, params, k, ransac, round);
    std::vector<std::vector<LandmarkLink>> extra(frames.size());
    ParallelFor(frames.size(), [&](std::size_t i) {
      const auto& o = outcomes[i];
      if (!o || o->failure != MatchFailure::kNone) return;
      extra[i] = GuidedLinks(frames[i], o->estimate->pose, db, params);
    });
    int added = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!outcomes[i]) continue;
      auto& f = frames[i];
      const MatchOutcome& o = *outcomes[i];
      const bool anchored = o.failure == MatchFailure::kNone;
      if (anchored) {
        std::vector<LandmarkLink> links = o.links;
        links.insert(links.end(), f.global_links.begin(), f.global_links.end());
        links.insert(links.end(), extra[i].begin(), extra[i].end());
        CommitAnchor(f, *o.estimate, AnchorSource::kTemporal, round, links, landmarks, k,
                     ransac.inlier_threshold);
        ++added;
      } else {
        KeepCandidate(f, o);
      }
      result.log.push_back(Record(f, o, "temporal", round, anchored));
    }
    if (added == 0) break;
  }
  return result;
}

}  // namespace anchorloc
