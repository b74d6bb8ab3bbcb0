#include <algorithm>
#include <cmath>
#include <numeric>

#include "anchorloc/errors.h"
#include "anchorloc/mapdb.h"
#include "anchorloc/parallel.h"

namespace anchorloc {
namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t Find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void Union(std::size_t a, std::size_t b) {
    a = Find(a);
    b = Find(b);
    // Smaller root wins so the representative is independent of merge order.
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<std::vector<TrackNode>> BuildTracks(const std::vector<PosedFrame>& frames,
                                                int adjacency, double ratio) {
  const int n = static_cast<int>(frames.size());
  std::vector<std::size_t> offset(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    offset[i + 1] = offset[i] + frames[i].features.keypoints.size();
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= std::min(n - 1, i + adjacency); ++j) pairs.emplace_back(i, j);
  }
  std::vector<MatchSet> matches(pairs.size());
  ParallelFor(pairs.size(), [&](std::size_t p) {
    const auto& a = frames[pairs[p].first].features.keypoints;
    const auto& b = frames[pairs[p].second].features.keypoints;
    if (a.empty() || b.empty()) return;
    matches[p] = MatchKeypoints(a, b, ratio);
  });

  UnionFind uf(offset[n]);
  std::vector<std::uint8_t> matched(offset[n], 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [fa, fb] = pairs[p];
    for (const auto& m : matches[p]) {
      const std::size_t na = offset[fa] + m.i;
      const std::size_t nb = offset[fb] + m.j;
      uf.Union(na, nb);
      matched[na] = matched[nb] = 1;
    }
  }
  std::vector<std::vector<TrackNode>> tracks;
  std::unordered_map<std::size_t, std::size_t> root_track;
  for (int f = 0; f < n; ++f) {
    for (std::size_t kp = 0; kp < frames[f].features.keypoints.size(); ++kp) {
      const std::size_t node = offset[f] + kp;
      if (!matched[node]) continue;
      const std::size_t root = uf.Find(node);
      auto [it, inserted] = root_track.emplace(root, tracks.size());
      if (inserted) tracks.emplace_back();
      tracks[it->second].push_back({f, static_cast<int>(kp)});
    }
  }
  return tracks;
}

SceneDatabase BuildMap(std::vector<PosedFrame> frames, const CameraIntrinsics& k,
                       const MapBuildOptions& options) {
  options.Validate();
  k.Validate();
  if (frames.size() < 2) throw InsufficientFrames("map building needs >= 2 frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Pose& p = frames[i].pose;
    if (!p.translation().allFinite() || !p.rotation().coeffs().allFinite()) {
      throw InvalidArgument("map frame " + std::to_string(frames[i].frame_id) +
                            " has a non-finite pose");
    }
    if (i > 0 && frames[i].frame_id <= frames[i - 1].frame_id) {
      throw InvalidArgument("map frame ids must be strictly increasing");
    }
  }
  if (frames.front().features.keypoints.descriptor_dim() > 0) {
    for (const auto& f : frames) {
      if (!f.features.keypoints.empty() &&
          f.features.keypoints.descriptor_dim() !=
              frames.front().features.keypoints.descriptor_dim()) {
        throw DimensionMismatch("descriptor widths differ between map frames");
      }
    }
  }

  const auto tracks = BuildTracks(frames, options.adjacency, options.ratio);

  std::vector<std::vector<TrackPoint>> per_track(tracks.size());
  ParallelFor(tracks.size(), [&](std::size_t t) {
    std::vector<TrackObservation> obs;
    obs.reserve(tracks[t].size());
    for (const auto& node : tracks[t]) {
      const auto& f = frames[node.frame];
      obs.push_back({node.frame, {f.pose, f.features.keypoints.keypoints[node.keypoint].position}});
    }
    // Member indices refer to tracks[t] since obs follows the same order.
    per_track[t] = TriangulateTrack(obs, k, options.gates);
  });

  std::vector<MapFrame> map_frames(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto& mf = map_frames[i];
    mf.frame_id = frames[i].frame_id;
    mf.image_ref = std::move(frames[i].image_ref);
    mf.pose = frames[i].pose;
    mf.global = std::move(frames[i].features.global);
    mf.keypoints = std::move(frames[i].features.keypoints);
    mf.point_ids.assign(mf.keypoints.size(), std::nullopt);
  }
  LandmarkTable landmarks;
  LandmarkId next_id = 0;
  Eigen::Vector2d r;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (const auto& ap : per_track[t]) {
      Landmark lm;
      lm.id = next_id++;
      lm.position = ap.result.point;
      double err = 0.0;
      for (int m : ap.members) {
        const auto& node = tracks[t][m];
        auto& mf = map_frames[node.frame];
        lm.observations.push_back({mf.frame_id, node.keypoint});
        mf.point_ids[node.keypoint] = lm.id;
        ReprojectionResidual(mf.pose, k, lm.position,
                             mf.keypoints.keypoints[node.keypoint].position, &r);
        err += r.norm();
      }
      lm.mean_reprojection_error = err / static_cast<double>(ap.members.size());
      landmarks.emplace(lm.id, std::move(lm));
    }
  }
  if (landmarks.empty()) {
    throw DegenerateGeometry("no track survived triangulation; check poses and texture");
  }
  return SceneDatabase(k, std::move(map_frames), std::move(landmarks), options);
}

}  // namespace anchorloc
