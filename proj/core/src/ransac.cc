#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "anchorloc/errors.h"
#include "anchorloc/pnp.h"
#include "anchorloc/random.h"

namespace anchorloc {
namespace {

constexpr int kSampleSize = 3;
constexpr int kDltSampleSize = 6;
constexpr int kMaxConsecutiveDegenerate = 10;
constexpr int kMinInliers = 4;

int CountInliers(const Pose& pose, std::span<const Correspondence2D3D> c,
                 const CameraIntrinsics& k, double threshold_sq) {
  int count = 0;
  Eigen::Vector2d r;
  for (const auto& x : c) {
    if (ReprojectionResidual(pose, k, x.point, x.pixel, &r) &&
        r.squaredNorm() < threshold_sq) {
      ++count;
    }
  }
  return count;
}

PoseEstimate Score(const Pose& pose, std::span<const Correspondence2D3D> c,
                   const CameraIntrinsics& k, double threshold) {
  PoseEstimate est;
  est.pose = pose;
  est.inlier_mask.assign(c.size(), 0);
  double error_sum = 0.0;
  Eigen::Vector2d r;
  for (size_t i = 0; i < c.size(); ++i) {
    if (!ReprojectionResidual(pose, k, c[i].point, c[i].pixel, &r)) continue;
    const double e = r.norm();
    if (e < threshold) {
      est.inlier_mask[i] = 1;
      ++est.num_inliers;
      error_sum += e;
    }
  }
  est.mean_inlier_error = est.num_inliers > 0 ? error_sum / est.num_inliers : 0.0;
  return est;
}

int RequiredIterations(int inliers, int total, double confidence,
                       int sample_size, int cap) {
  const double w = static_cast<double>(inliers) / total;
  const double p_good = std::pow(w, sample_size);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  if (!std::isfinite(n) || n >= cap) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

// Draws `size` distinct indices from [0, n).
template <size_t N>
std::array<size_t, N> DrawSample(Rng& rng, size_t n) {
  std::array<size_t, N> idx{};
  for (size_t s = 0; s < N; ++s) {
    bool fresh = false;
    while (!fresh) {
      idx[s] = static_cast<size_t>(rng.UniformIndex(n));
      fresh = std::find(idx.begin(), idx.begin() + s, idx[s]) == idx.begin() + s;
    }
  }
  return idx;
}

}  // namespace

void RansacParams::Validate() const {
  if (!(inlier_threshold > 0.0)) {
    throw InvalidArgument("RANSAC inlier threshold must be > 0");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidArgument("RANSAC confidence must lie in (0, 1)");
  }
  if (max_iterations < 1) {
    throw InvalidArgument("RANSAC max_iterations must be >= 1");
  }
}

std::optional<PoseEstimate> EstimatePoseRansac(
    std::span<const Correspondence2D3D> c, const CameraIntrinsics& k,
    const RansacParams& params) {
  params.Validate();
  if (c.size() < 4) {
    throw InsufficientCorrespondences("PnP RANSAC needs >= 4 correspondences, got " +
                                      std::to_string(c.size()));
  }
  const double threshold_sq = params.inlier_threshold * params.inlier_threshold;
  const int n = static_cast<int>(c.size());
  Rng rng(params.seed);

  int best_inliers = -1;
  Pose best_pose;
  int needed = params.max_iterations;
  int consecutive_degenerate = 0;
  bool any_hypothesis = false;
  for (int iter = 0; iter < std::min(needed, params.max_iterations);) {
    const auto idx = DrawSample<kSampleSize>(rng, c.size());
    const std::array<Correspondence2D3D, 3> sample = {c[idx[0]], c[idx[1]], c[idx[2]]};
    const double area = 0.5 * (sample[1].point - sample[0].point)
                                  .cross(sample[2].point - sample[0].point)
                                  .norm();
    if (!(area >= 1e-10)) {
      if (++consecutive_degenerate > kMaxConsecutiveDegenerate) ++iter;
      continue;
    }
    consecutive_degenerate = 0;
    ++iter;
    std::vector<Pose> hypotheses;
    try {
      hypotheses = SolveP3P(sample, k);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    for (const auto& pose : hypotheses) {
      any_hypothesis = true;
      const int inliers = CountInliers(pose, c, k, threshold_sq);
      if (inliers > best_inliers) {
        best_inliers = inliers;
        best_pose = pose;
        needed = RequiredIterations(inliers, n, params.confidence, kSampleSize,
                                    params.max_iterations);
      }
    }
  }

  // Non-minimal fallback when P3P never produced a model.
  if (!any_hypothesis && n >= kDltSampleSize) {
    const int budget = std::max(1, params.max_iterations / 10);
    needed = budget;
    for (int iter = 0; iter < std::min(needed, budget); ++iter) {
      const auto idx = DrawSample<kDltSampleSize>(rng, c.size());
      std::array<Correspondence2D3D, kDltSampleSize> sample;
      for (int s = 0; s < kDltSampleSize; ++s) sample[s] = c[idx[s]];
      const auto pose = SolvePnPDlt(sample, k);
      if (!pose) continue;
      const int inliers = CountInliers(*pose, c, k, threshold_sq);
      if (inliers > best_inliers) {
        best_inliers = inliers;
        best_pose = *pose;
        needed = RequiredIterations(inliers, n, params.confidence,
                                    kDltSampleSize, budget);
      }
    }
  }

  if (best_inliers < kMinInliers) return std::nullopt;

  PoseEstimate best = Score(best_pose, c, k, params.inlier_threshold);
  // Polish on the inlier set; repeat once if the polished pose changes it.
  for (int round = 0; round < 2; ++round) {
    std::vector<Correspondence2D3D> inliers;
    inliers.reserve(best.num_inliers);
    for (int i = 0; i < n; ++i) {
      if (best.inlier_mask[i]) inliers.push_back(c[i]);
    }
    if (inliers.size() < 4) break;
    const Pose polished = RefinePoseLM(best.pose, inliers, k);
    PoseEstimate candidate = Score(polished, c, k, params.inlier_threshold);
    if (candidate.num_inliers < kMinInliers) break;
    const bool same_mask = candidate.inlier_mask == best.inlier_mask;
    best = std::move(candidate);
    if (same_mask) break;
  }
  if (best.num_inliers < kMinInliers) return std::nullopt;
  return best;
}

}  // namespace anchorloc
