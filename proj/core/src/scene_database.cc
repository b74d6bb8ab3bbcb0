#include "anchorloc/mapdb.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "anchorloc/errors.h"

namespace anchorloc {

void MapBuildOptions::Validate() const {
  if (adjacency < 1) throw InvalidArgument("adjacency must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must be in (0, 1]");
  if (!(gates.max_reprojection_error > 0.0)) {
    throw InvalidArgument("max reprojection error must be positive");
  }
  if (!(gates.min_angle_deg >= 0.0)) {
    throw InvalidArgument("min triangulation angle must be >= 0");
  }
}

SceneDatabase::SceneDatabase(CameraIntrinsics intrinsics,
                             std::vector<MapFrame> frames,
                             LandmarkTable landmarks, MapBuildOptions options)
    : intrinsics_(intrinsics),
      frames_(std::move(frames)),
      landmarks_(std::move(landmarks)),
      options_(options) {
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (i > 0 && frames_[i].frame_id <= frames_[i - 1].frame_id) {
      throw ValidationError("map frame ids must be strictly increasing");
    }
    frame_index_.emplace(frames_[i].frame_id, i);
  }
  CheckConsistency();
}

const MapFrame* SceneDatabase::FindFrame(FrameId id) const {
  auto it = frame_index_.find(id);
  return it == frame_index_.end() ? nullptr : &frames_[it->second];
}

const Landmark* SceneDatabase::FindLandmark(LandmarkId id) const {
  auto it = landmarks_.find(id);
  return it == landmarks_.end() ? nullptr : &it->second;
}

std::vector<FrameId> SceneDatabase::Retrieve(const GlobalDescriptor& query,
                                             int n_r) const {
  if (frames_.empty()) throw EmptyDatabase("retrieval on an empty database");
  if (n_r < 1) throw InvalidArgument("n_r must be >= 1");
  std::vector<std::pair<double, FrameId>> scored;
  scored.reserve(frames_.size());
  for (const auto& f : frames_) {
    if (f.global.dim() != query.dim()) {
      throw DimensionMismatch("global descriptor width differs from the database");
    }
    scored.emplace_back(Similarity(query, f.global), f.frame_id);
  }
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(n_r), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + n, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<FrameId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scored[i].second;
  return out;
}

void SceneDatabase::CheckConsistency() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  for (const auto& f : frames_) {
    if (f.point_ids.size() != f.keypoints.size()) {
      fail("frame " + std::to_string(f.frame_id) + ": point_ids length != keypoint count");
    }
    for (std::size_t kp = 0; kp < f.point_ids.size(); ++kp) {
      const auto& id = f.point_ids[kp];
      if (!id) continue;
      const Landmark* lm = FindLandmark(*id);
      if (lm == nullptr) {
        fail("frame " + std::to_string(f.frame_id) + " references missing landmark " +
             std::to_string(*id));
      }
      const KeypointRef ref{f.frame_id, static_cast<int>(kp)};
      if (std::find(lm->observations.begin(), lm->observations.end(), ref) ==
          lm->observations.end()) {
        fail("landmark " + std::to_string(*id) + " does not list frame " +
             std::to_string(f.frame_id) + " keypoint " + std::to_string(kp));
      }
    }
  }
  for (const auto& [id, lm] : landmarks_) {
    if (lm.id != id) fail("landmark table key mismatch");
    if (lm.observations.size() < 2) {
      fail("landmark " + std::to_string(id) + " has fewer than 2 observations");
    }
    if (!lm.position.allFinite()) fail("landmark " + std::to_string(id) + " is not finite");
    for (const auto& obs : lm.observations) {
      const MapFrame* f = FindFrame(obs.frame_id);
      if (f == nullptr || obs.keypoint < 0 ||
          obs.keypoint >= static_cast<int>(f->point_ids.size()) ||
          f->point_ids[obs.keypoint] != id) {
        fail("landmark " + std::to_string(id) + " observation (" +
             std::to_string(obs.frame_id) + ", " + std::to_string(obs.keypoint) +
             ") is not back-referenced");
      }
    }
  }
}

}  // namespace anchorloc
