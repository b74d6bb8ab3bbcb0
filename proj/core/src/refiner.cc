#include "anchorloc/refiner.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "anchorloc/errors.h"
#include "anchorloc/parallel.h"

namespace anchorloc {
namespace {

// Seeds of registration attempts live in their own range of rounds so they
// never coincide with temporal rounds.
constexpr int kRegistrationRoundBase = 1000;

struct PairMatch {
  int frame_a = 0;
  int kp_a = 0;
  int frame_b = 0;
  int kp_b = 0;
};

class Refiner {
 public:
  Refiner(std::vector<QueryFrame> frames, const SceneDatabase& db, const CameraIntrinsics& k,
          const RefineParams& params, const RansacParams& ransac)
      : frames_(std::move(frames)),
        db_(db),
        k_(k),
        params_(params),
        ransac_(ransac),
        landmarks_(db, &new_landmarks_),
        posed_(frames_.size(), 0),
        registered_(frames_.size(), 0),
        poses_(frames_.size()) {
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (frames_[i].kp_landmark.size() != frames_[i].keypoints.size()) {
        frames_[i].kp_landmark.assign(frames_[i].keypoints.size(), std::nullopt);
      }
      if (frames_[i].anchored()) {
        posed_[i] = 1;
        poses_[i] = frames_[i].anchor->pose;
      }
    }
    next_id_ = db.landmarks().empty() ? 0 : db.landmarks().rbegin()->first + 1;
  }

  RefineResult Run() {
    RefineResult result;
    TriangulateNew();
    int pass = 0;
    while (pass < params_.max_passes) {
      ++pass;
      const int added = RegistrationPass(pass);
      result.registered += added;
      if (added == 0) break;
      TriangulateNew();
    }
    result.passes = pass;
    if (params_.bundle_adjust) result.ba = Adjust();
    UpdateLandmarkErrors();

    for (std::size_t i = 0; i < frames_.size(); ++i) {
      const auto& f = frames_[i];
      Provenance p = Provenance::kUnlocalized;
      if (f.anchored()) {
        p = f.source == AnchorSource::kGlobal ? Provenance::kAnchorGlobal
                                              : Provenance::kAnchorTemporal;
      } else if (registered_[i]) {
        p = Provenance::kRefined;
      }
      result.provenance[f.frame_id] = p;
      if (posed_[i]) result.poses[f.frame_id] = poses_[i];
    }
    result.frames = std::move(frames_);
    result.new_landmarks = std::move(new_landmarks_);
    return result;
  }

 private:
  bool InWindow(std::size_t a, std::size_t b) const {
    const FrameId d = frames_[a].frame_id - frames_[b].frame_id;
    return std::abs(d) <= params_.window / 2;
  }

  // Keypoints of frame i that carry no landmark yet, as a compact set.
  KeypointSet Unassociated(std::size_t i, std::vector<int>* index) const {
    const auto& f = frames_[i];
    index->clear();
    for (std::size_t kp = 0; kp < f.keypoints.size(); ++kp) {
      if (!f.kp_landmark[kp]) index->push_back(static_cast<int>(kp));
    }
    KeypointSet out;
    out.keypoints.reserve(index->size());
    out.descriptors.resize(static_cast<Eigen::Index>(index->size()),
                           f.keypoints.descriptors.cols());
    for (std::size_t r = 0; r < index->size(); ++r) {
      out.keypoints.push_back(f.keypoints.keypoints[(*index)[r]]);
      out.descriptors.row(static_cast<Eigen::Index>(r)) =
          f.keypoints.descriptors.row((*index)[r]);
    }
    return out;
  }

  void TriangulateNew() {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < frames_.size(); ++a) {
      if (!posed_[a]) continue;
      for (std::size_t b = a + 1; b < frames_.size() && InWindow(a, b); ++b) {
        if (!posed_[b] || !matched_pairs_.insert({a, b}).second) continue;
        pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
      }
    }
    std::vector<std::vector<int>> index(frames_.size());
    std::vector<KeypointSet> subsets(frames_.size());
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (posed_[i]) subsets[i] = Unassociated(i, &index[i]);
    }
    std::vector<MatchSet> found(pairs.size());
    ParallelFor(pairs.size(), [&](std::size_t p) {
      const auto& a = subsets[pairs[p].first];
      const auto& b = subsets[pairs[p].second];
      if (!a.empty() && !b.empty()) found[p] = MatchKeypoints(a, b, params_.ratio);
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [a, b] = pairs[p];
      for (const auto& m : found[p]) {
        matches_.push_back({a, index[a][m.i], b, index[b][m.j]});
      }
    }

    // Tracks over still-unassociated keypoints.
    std::vector<std::size_t> offset(frames_.size() + 1, 0);
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      offset[i + 1] = offset[i] + frames_[i].keypoints.size();
    }
    std::vector<std::size_t> parent(offset.back());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<std::uint8_t> used(offset.back(), 0);
    for (const auto& m : matches_) {
      if (frames_[m.frame_a].kp_landmark[m.kp_a] || frames_[m.frame_b].kp_landmark[m.kp_b]) {
        continue;
      }
      const std::size_t na = offset[m.frame_a] + m.kp_a;
      const std::size_t nb = offset[m.frame_b] + m.kp_b;
      used[na] = used[nb] = 1;
      std::size_t ra = find(na);
      std::size_t rb = find(nb);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::vector<std::vector<std::pair<int, int>>> tracks;
    std::map<std::size_t, std::size_t> root_track;
    for (std::size_t f = 0; f < frames_.size(); ++f) {
      for (std::size_t kp = 0; kp < frames_[f].keypoints.size(); ++kp) {
        const std::size_t node = offset[f] + kp;
        if (!used[node]) continue;
        auto [it, inserted] = root_track.emplace(find(node), tracks.size());
        if (inserted) tracks.emplace_back();
        tracks[it->second].emplace_back(static_cast<int>(f), static_cast<int>(kp));
      }
    }
    std::vector<std::vector<TrackPoint>> points(tracks.size());
    ParallelFor(tracks.size(), [&](std::size_t t) {
      std::vector<TrackObservation> obs;
      for (const auto& [f, kp] : tracks[t]) {
        obs.push_back({f, {poses_[f], frames_[f].keypoints.keypoints[kp].position}});
      }
      points[t] = TriangulateTrack(obs, k_, params_.gates);
    });
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      for (const auto& tp : points[t]) {
        Landmark lm;
        lm.id = next_id_++;
        lm.position = tp.result.point;
        for (int m : tp.members) {
          const auto [f, kp] = tracks[t][m];
          lm.observations.push_back({frames_[f].frame_id, kp});
          frames_[f].kp_landmark[kp] = lm.id;
        }
        new_landmarks_.emplace(lm.id, std::move(lm));
      }
    }
  }

  int RegistrationPass(int pass) {
    std::vector<std::optional<PoseEstimate>> estimates(frames_.size());
    std::vector<std::vector<LandmarkLink>> all_links(frames_.size());
    ParallelFor(frames_.size(), [&](std::size_t i) {
      if (posed_[i] || frames_[i].keypoints.empty()) return;
      const auto& q = frames_[i];
      std::vector<LandmarkLink> neighbour;
      for (std::size_t j = 0; j < frames_.size(); ++j) {
        if (j == i || !posed_[j] || !InWindow(i, j) || frames_[j].keypoints.empty()) continue;
        for (const auto& m : MatchKeypoints(q.keypoints, frames_[j].keypoints, params_.ratio)) {
          if (const auto& lid = frames_[j].kp_landmark[m.j]) {
            neighbour.push_back({m.i, *lid, m.score});
          }
        }
      }
      // Neighbour associations take precedence over map-frame proposals.
      MatchOutcome from_neighbours;
      DeduplicateLinks(neighbour, q, landmarks_, &from_neighbours);
      MatchOutcome from_map;
      DeduplicateLinks(q.global_links, q, landmarks_, &from_map);
      std::vector<std::pair<int, Correspondence2D3D>> merged;
      for (std::size_t c = 0; c < from_neighbours.keypoints.size(); ++c) {
        merged.emplace_back(from_neighbours.keypoints[c], from_neighbours.correspondences[c]);
      }
      std::set<int> covered(from_neighbours.keypoints.begin(), from_neighbours.keypoints.end());
      for (std::size_t c = 0; c < from_map.keypoints.size(); ++c) {
        if (!covered.count(from_map.keypoints[c])) {
          merged.emplace_back(from_map.keypoints[c], from_map.correspondences[c]);
        }
      }
      if (merged.size() < 4) return;
      std::sort(merged.begin(), merged.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<Correspondence2D3D> corr;
      for (auto& m : merged) corr.push_back(m.second);
      RansacParams p = ransac_;
      p.seed = AttemptSeed(ransac_.seed, q.frame_id, kRegistrationRoundBase + pass);
      auto est = EstimatePoseRansac(corr, k_, p);
      if (est && est->num_inliers >= params_.min_register_inliers) {
        estimates[i] = std::move(est);
        all_links[i] = std::move(neighbour);
        all_links[i].insert(all_links[i].end(), q.global_links.begin(), q.global_links.end());
      }
    });
    int added = 0;
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (!estimates[i]) continue;
      posed_[i] = registered_[i] = 1;
      poses_[i] = estimates[i]->pose;
      auto& f = frames_[i];
      AssociateKeypoints(f, poses_[i], all_links[i], landmarks_, k_, ransac_.inlier_threshold);
      // Extend the observation lists of new landmarks, one keypoint per frame.
      for (std::size_t kp = 0; kp < f.kp_landmark.size(); ++kp) {
        auto it = f.kp_landmark[kp] ? new_landmarks_.find(*f.kp_landmark[kp])
                                    : new_landmarks_.end();
        if (it == new_landmarks_.end()) continue;
        auto& obs = it->second.observations;
        if (std::any_of(obs.begin(), obs.end(),
                        [&](const KeypointRef& o) { return o.frame_id == f.frame_id; })) {
          f.kp_landmark[kp].reset();
          continue;
        }
        obs.push_back({f.frame_id, static_cast<int>(kp)});
      }
      ++added;
    }
    return added;
  }

  BAReport Adjust() {
    BAProblem problem;
    problem.intrinsics = k_;
    std::map<std::size_t, int> pose_slot;
    std::map<LandmarkId, int> lm_slot;
    auto slot_for_pose = [&](std::size_t i) {
      auto [it, inserted] = pose_slot.emplace(i, 0);
      if (inserted) it->second = problem.AddPose(poses_[i], !registered_[i]);
      return it->second;
    };
    auto slot_for_landmark = [&](LandmarkId id) {
      auto [it, inserted] = lm_slot.emplace(id, 0);
      if (inserted) {
        const bool is_new = new_landmarks_.count(id) > 0;
        it->second = problem.AddLandmark(*landmarks_.Find(id), !is_new);
      }
      return it->second;
    };
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (!posed_[i]) continue;
      const auto& f = frames_[i];
      for (std::size_t kp = 0; kp < f.keypoints.size(); ++kp) {
        const auto& lid = f.kp_landmark[kp];
        if (!lid || landmarks_.Find(*lid) == nullptr) continue;
        if (!registered_[i] && new_landmarks_.count(*lid) == 0) continue;  // all fixed
        problem.AddObservation(slot_for_pose(i), slot_for_landmark(*lid),
                               f.keypoints.keypoints[kp].position);
      }
    }
    if (problem.NumVariablePoses() == 0 && problem.NumVariableLandmarks() == 0) {
      return BAReport{};
    }
    if (std::find(problem.pose_fixed.begin(), problem.pose_fixed.end(), true) ==
        problem.pose_fixed.end()) {
      // Reference landmarks already pin the gauge; a fixed slot is still
      // required by the problem contract.
      problem.AddPose(db_.frames().front().pose, true);
    }
    const BAReport report = BundleAdjust(problem, params_.ba);
    for (const auto& [i, slot] : pose_slot) {
      if (registered_[i]) poses_[i] = problem.poses[slot];
    }
    for (const auto& [id, slot] : lm_slot) {
      auto it = new_landmarks_.find(id);
      if (it != new_landmarks_.end()) it->second.position = problem.landmarks[slot];
    }
    return report;
  }

  void UpdateLandmarkErrors() {
    std::map<FrameId, std::size_t> index;
    for (std::size_t i = 0; i < frames_.size(); ++i) index[frames_[i].frame_id] = i;
    Eigen::Vector2d r;
    for (auto& [id, lm] : new_landmarks_) {
      double sum = 0.0;
      for (const auto& o : lm.observations) {
        const std::size_t i = index.at(o.frame_id);
        ReprojectionResidual(poses_[i], k_, lm.position,
                             frames_[i].keypoints.keypoints[o.keypoint].position, &r);
        sum += r.norm();
      }
      lm.mean_reprojection_error = sum / static_cast<double>(lm.observations.size());
    }
  }

  std::vector<QueryFrame> frames_;
  const SceneDatabase& db_;
  CameraIntrinsics k_;
  RefineParams params_;
  RansacParams ransac_;
  LandmarkTable new_landmarks_;
  LandmarkIndex landmarks_;
  std::vector<std::uint8_t> posed_;
  std::vector<std::uint8_t> registered_;
  std::vector<Pose> poses_;
  std::set<std::pair<std::size_t, std::size_t>> matched_pairs_;
  std::vector<PairMatch> matches_;
  LandmarkId next_id_ = 0;
};

}  // namespace

void RefineParams::Validate() const {
  if (min_register_inliers < 4) throw InvalidArgument("min_register_inliers must be >= 4");
  if (window < 2 || window % 2 != 0) throw InvalidArgument("window must be even and >= 2");
  if (max_passes < 1) throw InvalidArgument("max_passes must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must be in (0, 1]");
  if (!(gates.max_reprojection_error > 0.0) || !(gates.min_angle_deg >= 0.0)) {
    throw InvalidArgument("invalid triangulation gates");
  }
}

std::string ToString(Provenance p) {
  switch (p) {
    case Provenance::kAnchorGlobal: return "anchor-global";
    case Provenance::kAnchorTemporal: return "anchor-temporal";
    case Provenance::kRefined: return "refined";
    case Provenance::kUnlocalized: return "unlocalized";
  }
  return "unlocalized";
}

Provenance ParseProvenance(const std::string& tag) {
  for (auto p : {Provenance::kAnchorGlobal, Provenance::kAnchorTemporal, Provenance::kRefined,
                 Provenance::kUnlocalized}) {
    if (ToString(p) == tag) return p;
  }
  throw InvalidArgument("unknown provenance tag '" + tag + "'");
}

RefineResult RefineAll(std::vector<QueryFrame> frames, const SceneDatabase& db,
                       const CameraIntrinsics& k, const RefineParams& params,
                       const RansacParams& ransac) {
  params.Validate();
  ransac.Validate();
  k.Validate();
  if (db.empty()) throw EmptyDatabase("refinement against an empty database");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_id <= frames[i - 1].frame_id) {
      throw InvalidArgument("query frames must be sorted by strictly increasing id");
    }
  }
  return Refiner(std::move(frames), db, k, params, ransac).Run();
}

void CheckAugmentedConsistency(const SceneDatabase& db, const RefineResult& result) {
  db.CheckConsistency();
  std::map<FrameId, const QueryFrame*> frames;
  for (const auto& f : result.frames) {
    if (f.kp_landmark.size() != f.keypoints.size()) {
      throw ValidationError("frame " + std::to_string(f.frame_id) +
                            ": kp_landmark length != keypoint count");
    }
    frames[f.frame_id] = &f;
  }
  for (const auto& [id, lm] : result.new_landmarks) {
    if (lm.id != id) throw ValidationError("new landmark table key mismatch");
    if (db.FindLandmark(id) != nullptr) {
      throw ValidationError("new landmark " + std::to_string(id) + " collides with the map");
    }
    if (lm.observations.size() < 2) {
      throw ValidationError("new landmark " + std::to_string(id) + " has < 2 observations");
    }
    for (const auto& o : lm.observations) {
      auto it = frames.find(o.frame_id);
      if (it == frames.end() || o.keypoint < 0 ||
          o.keypoint >= static_cast<int>(it->second->kp_landmark.size()) ||
          it->second->kp_landmark[o.keypoint] != id) {
        throw ValidationError("new landmark " + std::to_string(id) + " observation (" +
                              std::to_string(o.frame_id) + ", " +
                              std::to_string(o.keypoint) + ") is not back-referenced");
      }
    }
  }
  for (const auto& f : result.frames) {
    for (std::size_t kp = 0; kp < f.kp_landmark.size(); ++kp) {
      const auto& lid = f.kp_landmark[kp];
      if (!lid) continue;
      if (db.FindLandmark(*lid) != nullptr) continue;
      auto it = result.new_landmarks.find(*lid);
      const KeypointRef ref{f.frame_id, static_cast<int>(kp)};
      if (it == result.new_landmarks.end() ||
          std::find(it->second.observations.begin(), it->second.observations.end(), ref) ==
              it->second.observations.end()) {
        throw ValidationError("frame " + std::to_string(f.frame_id) + " keypoint " +
                              std::to_string(kp) + " references unknown landmark " +
                              std::to_string(*lid));
      }
    }
  }
}

}  // namespace anchorloc
