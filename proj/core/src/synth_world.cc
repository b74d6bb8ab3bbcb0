#include <cmath>

#include "anchorloc/errors.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace anchorloc {
namespace {

constexpr std::uint64_t kExtraSeedBase = std::uint64_t{1} << 40;

Eigen::Vector3d Uniform3(Rng& rng, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) p(i) = rng.Uniform(lo(i), hi(i));
  return p;
}

// Uniform Catmull-Rom segment between p1 and p2.
Eigen::Vector3d CatmullRom(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                           const Eigen::Vector3d& p2, const Eigen::Vector3d& p3,
                           double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

Eigen::Vector3d SampleSpline(const std::vector<Eigen::Vector3d>& pts, double u) {
  const int n = static_cast<int>(pts.size());
  if (n == 1) return pts[0];
  const int seg = std::min(static_cast<int>(std::floor(u)), n - 2);
  const double t = u - seg;
  auto at = [&](int i) { return pts[std::clamp(i, 0, n - 1)]; };
  return CatmullRom(at(seg - 1), at(seg), at(seg + 1), at(seg + 2), t);
}

}  // namespace

void WorldSpec::Validate() const {
  if (base_points < 1) throw InvalidArgument("base_points must be >= 1");
  if (num_copies < 1) throw InvalidArgument("num_copies must be >= 1");
  if ((cluster_extent.array() < 0.0).any()) {
    throw InvalidArgument("cluster extent must be non-negative");
  }
  if (num_copies > 1) {
    if (copy_direction.norm() < 1e-12) throw InvalidArgument("copy_direction is zero");
    const Eigen::Vector3d d = copy_direction.normalized();
    const double half_width = d.cwiseAbs().dot(cluster_extent);
    if (!(copy_spacing > 2.0 * half_width)) {
      throw InvalidArgument("copy spacing must exceed twice the cluster extent");
    }
  }
  for (const auto& g : extra_groups) {
    if (g.count < 0 || (g.max.array() < g.min.array()).any()) {
      throw InvalidArgument("invalid extra point group");
    }
  }
}

World GenerateWorld(const WorldSpec& spec) {
  spec.Validate();
  World world;
  world.base_points = spec.base_points;
  Rng rng(MixSeed(spec.texture_seed, 0x776f726c64));
  std::vector<Point3> base(spec.base_points);
  for (auto& p : base) {
    p = spec.cluster_center + Uniform3(rng, -spec.cluster_extent, spec.cluster_extent);
  }
  const Eigen::Vector3d dir =
      spec.num_copies > 1 ? spec.copy_direction.normalized() : Eigen::Vector3d::UnitX();
  for (int c = 0; c < spec.num_copies; ++c) {
    for (int j = 0; j < spec.base_points; ++j) {
      world.points.push_back(base[j] + c * spec.copy_spacing * dir);
      world.texture_seeds.push_back(MixSeed(spec.texture_seed, static_cast<std::uint64_t>(j)));
      world.copy_index.push_back(c);
    }
  }
  std::uint64_t extra = 0;
  for (const auto& g : spec.extra_groups) {
    for (int i = 0; i < g.count; ++i) {
      world.points.push_back(Uniform3(rng, g.min, g.max));
      world.texture_seeds.push_back(MixSeed(spec.texture_seed, kExtraSeedBase + extra++));
      world.copy_index.push_back(-1);
    }
  }
  return world;
}

Eigen::VectorXf TextureDescriptor(std::uint64_t texture_seed, int dim) {
  Rng rng(MixSeed(texture_seed, 0x64657363));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.Normal();
  return (v / v.norm()).cast<float>();
}

Pose LookAt(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
            const Eigen::Vector3d& up) {
  const Eigen::Vector3d f = target - center;
  if (f.norm() < 1e-12) throw InvalidArgument("look-at target equals the center");
  const Eigen::Vector3d forward = f.normalized();
  const Eigen::Vector3d right_raw = forward.cross(up);
  if (right_raw.norm() < 1e-9) throw InvalidArgument("viewing direction parallel to up");
  const Eigen::Vector3d right = right_raw.normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r_wc;
  r_wc.col(0) = right;
  r_wc.col(1) = down;
  r_wc.col(2) = forward;
  return Pose::FromCenter(r_wc, center);
}

std::vector<Pose> CatmullRomTrajectory(const PathSpec& path) {
  if (path.centers.empty()) throw InvalidArgument("path needs control points");
  if (path.targets.size() != 1 && path.targets.size() != path.centers.size()) {
    throw InvalidArgument("path needs one target or one per control point");
  }
  if (path.frames < 1) throw InvalidArgument("path needs >= 1 frame");
  const double span = static_cast<double>(path.centers.size() - 1);
  std::vector<Pose> poses;
  poses.reserve(path.frames);
  for (int i = 0; i < path.frames; ++i) {
    const double u = path.frames == 1 ? 0.0 : span * i / (path.frames - 1);
    const Eigen::Vector3d c = SampleSpline(path.centers, u);
    const Eigen::Vector3d t =
        path.targets.size() == 1 ? path.targets[0] : SampleSpline(path.targets, u);
    poses.push_back(LookAt(c, t, path.up));
  }
  return poses;
}

}  // namespace anchorloc
