#include "anchorloc/triangulation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "anchorloc/errors.h"
#include "anchorloc/pnp.h"

namespace anchorloc {
namespace {

constexpr double kMinRayAngleRad = 1e-4;
// Hypotheses drawn per split round: pairs among this many evenly spaced
// observations of the track.
constexpr int kHypothesisSamples = 12;

double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double ReprojectionCost(const Point3& x,
                        std::span<const TriangulationObservation> obs,
                        const CameraIntrinsics& k, bool* behind) {
  double cost = 0.0;
  Eigen::Vector2d r;
  *behind = false;
  for (const auto& o : obs) {
    if (!ReprojectionResidual(o.pose, k, x, o.pixel, &r)) {
      *behind = true;
      return std::numeric_limits<double>::infinity();
    }
    cost += r.squaredNorm();
  }
  return cost;
}

Point3 RefinePoint(const Point3& initial,
                   std::span<const TriangulationObservation> obs,
                   const CameraIntrinsics& k) {
  Point3 x = initial;
  bool behind = false;
  double cost = ReprojectionCost(x, obs, k, &behind);
  if (behind) return x;
  double lambda = 1e-6;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 3> j;
    for (const auto& o : obs) {
      ReprojectionResidual(o.pose, k, x, o.pixel, &r, nullptr, &j);
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * r;
    }
    if (g.lpNorm<Eigen::Infinity>() < 1e-14 || cost == 0.0) break;
    bool accepted = false;
    while (!accepted && lambda < 1e12) {
      Eigen::Matrix3d damped = h;
      damped.diagonal() += lambda * (h.diagonal().array() + 1e-12).matrix();
      const Eigen::Vector3d delta = damped.ldlt().solve(-g);
      const Point3 candidate = x + delta;
      const double new_cost = ReprojectionCost(candidate, obs, k, &behind);
      if (!behind && new_cost < cost) {
        const double decrease = (cost - new_cost) / cost;
        x = candidate;
        cost = new_cost;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
        if (decrease < 1e-14) return x;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return x;
}

// Per-frame best observation of `x` within the gate, among `candidates`.
std::vector<int> Support(const Point3& x, std::span<const TrackObservation> obs,
                         const std::vector<int>& candidates,
                         const CameraIntrinsics& k, double gate,
                         double* total_error) {
  std::vector<int> best;  // parallel to frames seen in order
  std::vector<double> best_err;
  std::vector<int> best_frame;
  Eigen::Vector2d r;
  for (int idx : candidates) {
    const auto& o = obs[idx];
    if (!ReprojectionResidual(o.view.pose, k, x, o.view.pixel, &r)) continue;
    const double e = r.norm();
    if (e > gate) continue;
    auto it = std::find(best_frame.begin(), best_frame.end(), o.group);
    if (it == best_frame.end()) {
      best_frame.push_back(o.group);
      best.push_back(idx);
      best_err.push_back(e);
    } else {
      const auto slot = static_cast<std::size_t>(it - best_frame.begin());
      if (e < best_err[slot]) {
        best[slot] = idx;
        best_err[slot] = e;
      }
    }
  }
  if (total_error) {
    *total_error = std::accumulate(best_err.begin(), best_err.end(), 0.0);
  }
  std::sort(best.begin(), best.end());
  return best;
}

std::optional<TriangulationResult> TriangulateMembers(
    std::span<const TrackObservation> obs, const std::vector<int>& members,
    const CameraIntrinsics& k) {
  std::vector<TriangulationObservation> views;
  views.reserve(members.size());
  for (int idx : members) views.push_back(obs[idx].view);
  return Triangulate(views, k);
}

int DistinctFrames(std::span<const TrackObservation> obs, const std::vector<int>& idx) {
  std::vector<int> frames;
  for (int i : idx) frames.push_back(obs[i].group);
  std::sort(frames.begin(), frames.end());
  return static_cast<int>(std::unique(frames.begin(), frames.end()) - frames.begin());
}

// Grows the support of a seed point to convergence and applies the gates.
std::optional<TrackPoint> Consolidate(std::span<const TrackObservation> obs,
                                         const std::vector<int>& remaining,
                                         std::vector<int> members,
                                         const CameraIntrinsics& k,
                                         const TriangulationGates& gates) {
  std::optional<TriangulationResult> tri;
  for (int round = 0; round < 3; ++round) {
    if (DistinctFrames(obs, members) < 2) return std::nullopt;
    tri = TriangulateMembers(obs, members, k);
    if (!tri) return std::nullopt;
    auto next = Support(tri->point, obs, remaining, k, gates.max_reprojection_error,
                        nullptr);
    if (next == members) break;
    members = std::move(next);
    tri.reset();
  }
  if (!tri) {
    if (DistinctFrames(obs, members) < 2) return std::nullopt;
    tri = TriangulateMembers(obs, members, k);
    if (!tri) return std::nullopt;
  }
  if (!gates.Accepts(*tri)) return std::nullopt;
  return TrackPoint{*tri, std::move(members)};
}

}  // namespace

TriangulationResult EvaluatePoint(
    const Point3& point, std::span<const TriangulationObservation> observations,
    const CameraIntrinsics& k) {
  TriangulationResult result;
  result.point = point;
  Eigen::Vector2d r;
  for (const auto& o : observations) {
    const double e = ReprojectionResidual(o.pose, k, point, o.pixel, &r)
                         ? r.norm()
                         : std::numeric_limits<double>::infinity();
    result.max_reprojection_error = std::max(result.max_reprojection_error, e);
  }
  result.min_angle_deg = 180.0;
  result.max_angle_deg = 0.0;
  for (size_t i = 0; i < observations.size(); ++i) {
    const Eigen::Vector3d ri = point - observations[i].pose.Center();
    for (size_t j = i + 1; j < observations.size(); ++j) {
      const Eigen::Vector3d rj = point - observations[j].pose.Center();
      const double angle = AngleBetween(ri, rj) * 180.0 / std::numbers::pi;
      result.min_angle_deg = std::min(result.min_angle_deg, angle);
      result.max_angle_deg = std::max(result.max_angle_deg, angle);
    }
  }
  if (observations.size() < 2) result.min_angle_deg = 0.0;
  return result;
}

std::optional<TriangulationResult> Triangulate(
    std::span<const TriangulationObservation> observations,
    const CameraIntrinsics& k) {
  if (observations.size() < 2) {
    throw InvalidArgument("triangulation needs >= 2 observations");
  }
  // Viewing rays in world coordinates; if they are all parallel and leave
  // from the same center the point is unobservable.
  double max_ray_angle = 0.0;
  double max_baseline = 0.0;
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto& oi = observations[i];
    const Eigen::Vector3d di = oi.pose.rotation().conjugate() * k.Bearing(oi.pixel);
    for (size_t j = i + 1; j < observations.size(); ++j) {
      const auto& oj = observations[j];
      const Eigen::Vector3d dj =
          oj.pose.rotation().conjugate() * k.Bearing(oj.pixel);
      max_ray_angle = std::max(max_ray_angle, AngleBetween(di, dj));
      max_baseline =
          std::max(max_baseline, (oi.pose.Center() - oj.pose.Center()).norm());
    }
  }
  if (max_baseline <= 1e-12 || max_ray_angle < kMinRayAngleRad) {
    return std::nullopt;
  }

  Eigen::MatrixXd a(2 * observations.size(), 4);
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = o.pose.RotationMatrix();
    p.col(3) = o.pose.translation();
    const double u = (o.pixel.x() - k.cx) / k.fx;
    const double v = (o.pixel.y() - k.cy) / k.fy;
    a.row(2 * i) = u * p.row(2) - p.row(0);
    a.row(2 * i + 1) = v * p.row(2) - p.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(2) <= 1e-12 * sv(0)) return std::nullopt;
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) <= 1e-12 * xh.head<3>().norm()) return std::nullopt;
  const Point3 initial = xh.head<3>() / xh(3);
  for (const auto& o : observations) {
    if (o.pose.Transform(initial).z() <= 1e-9) return std::nullopt;
  }
  const Point3 refined = RefinePoint(initial, observations, k);
  TriangulationResult result = EvaluatePoint(refined, observations, k);
  if (!std::isfinite(result.max_reprojection_error) ||
      result.max_angle_deg * std::numbers::pi / 180.0 < kMinRayAngleRad) {
    return std::nullopt;
  }
  return result;
}

std::vector<TrackPoint> TriangulateTrack(std::span<const TrackObservation> obs,
                                         const CameraIntrinsics& k,
                                         const TriangulationGates& gates) {
  std::vector<TrackPoint> out;
  std::vector<int> remaining(obs.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  while (DistinctFrames(obs, remaining) >= 2) {
    // Common case: one observation per frame, all mutually consistent.
    if (DistinctFrames(obs, remaining) == static_cast<int>(remaining.size())) {
      auto tri = TriangulateMembers(obs, remaining, k);
      if (tri && gates.Accepts(*tri)) {
        out.push_back({*tri, remaining});
        break;
      }
    }
    // Otherwise seed from the two-view hypothesis with the largest support.
    const int n = static_cast<int>(remaining.size());
    const int m = std::min(n, kHypothesisSamples);
    std::vector<int> sample(m);
    for (int i = 0; i < m; ++i) {
      sample[i] = remaining[static_cast<std::size_t>(
          (static_cast<long long>(i) * (n - 1)) / std::max(1, m - 1))];
    }
    std::vector<int> best_members;
    double best_error = 0.0;
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        if (obs[sample[a]].group == obs[sample[b]].group) continue;
        auto tri = TriangulateMembers(obs, {sample[a], sample[b]}, k);
        if (!tri || tri->max_reprojection_error > gates.max_reprojection_error ||
            tri->max_angle_deg < gates.min_angle_deg) {
          continue;
        }
        double err = 0.0;
        auto members = Support(tri->point, obs, remaining, k,
                               gates.max_reprojection_error, &err);
        if (members.size() > best_members.size() ||
            (members.size() == best_members.size() && err < best_error)) {
          best_members = std::move(members);
          best_error = err;
        }
      }
    }
    if (best_members.size() < 2) break;
    auto accepted = Consolidate(obs, remaining, best_members, k, gates);
    if (!accepted) break;
    std::vector<int> rest;
    std::set_difference(remaining.begin(), remaining.end(),
                        accepted->members.begin(), accepted->members.end(),
                        std::back_inserter(rest));
    out.push_back(std::move(*accepted));
    remaining = std::move(rest);
  }
  return out;
}


}  // namespace anchorloc
