#include <algorithm>
#include <cmath>
#include <numbers>

#include "anchorloc/errors.h"
#include "anchorloc/features.h"
#include "anchorloc/parallel.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace anchorloc {
namespace {

// Static per-point strength; the same points survive the keypoint cap in
// every frame, like stable corners would.
std::uint64_t Priority(const World& world, int p) {
  return MixSeed(world.texture_seeds[p], static_cast<std::uint64_t>(p));
}

Eigen::VectorXf GlobalTexture(std::uint64_t texture_seed) {
  Rng rng(MixSeed(texture_seed, 0x676c6f62));
  Eigen::VectorXf v(kBuiltinGlobalDim);
  for (int i = 0; i < kBuiltinGlobalDim; ++i) v(i) = static_cast<float>(rng.Normal());
  return v;
}

struct Visible {
  int point = 0;
  Pixel pixel = Pixel::Zero();
  double depth = 0.0;
};

std::vector<Visible> VisiblePoints(const World& world, const SequenceSpec& spec,
                                   const CameraIntrinsics& k, int frame) {
  const Pose& pose = spec.trajectory[frame];
  std::vector<Visible> out;
  for (int p = 0; p < static_cast<int>(world.points.size()); ++p) {
    const Eigen::Vector3d xc = pose.Transform(world.points[p]);
    if (xc.z() <= spec.min_depth) continue;
    const Pixel px(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
    if (!k.InImage(px)) continue;
    if (spec.visible && !spec.visible(frame, p)) continue;
    out.push_back({p, px, xc.z()});
  }
  return out;
}

}  // namespace

void SequenceSpec::Validate() const {
  if (trajectory.empty()) throw InvalidArgument("sequence trajectory is empty");
  if (keypoint_noise < 0.0 || descriptor_noise < 0.0 || blur_sigma < 0.0 ||
      image_noise < 0.0) {
    throw InvalidArgument("noise levels must be >= 0");
  }
  if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) {
    throw InvalidArgument("outlier rate must be in [0, 1)");
  }
  if (max_keypoints < 1) throw InvalidArgument("max_keypoints must be >= 1");
}

std::vector<SyntheticFrame> RenderFeatures(const World& world,
                                           const SequenceSpec& spec,
                                           const CameraIntrinsics& k) {
  spec.Validate();
  k.Validate();
  const int n = static_cast<int>(spec.trajectory.size());
  std::vector<SyntheticFrame> frames(n);
  ParallelFor(n, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    auto visible = VisiblePoints(world, spec, k, f);
    if (visible.empty()) {
      throw EmptyView("frame " + std::to_string(spec.first_frame_id + f) +
                      " sees no world point");
    }
    if (static_cast<int>(visible.size()) > spec.max_keypoints) {
      std::stable_sort(visible.begin(), visible.end(), [&](const auto& a, const auto& b) {
        return Priority(world, a.point) > Priority(world, b.point);
      });
      visible.resize(spec.max_keypoints);
    }
    Rng rng(MixSeed(spec.seed, static_cast<std::uint64_t>(f)));
    for (std::size_t i = visible.size(); i > 1; --i) {
      std::swap(visible[i - 1], visible[rng.UniformIndex(i)]);
    }

    SyntheticFrame& out = frames[f];
    out.frame_id = spec.first_frame_id + f;
    out.pose = spec.trajectory[f];
    const int count = static_cast<int>(visible.size());
    auto& kps = out.features.keypoints;
    kps.keypoints.resize(count);
    kps.descriptors.resize(count, kBuiltinDescriptorDim);
    out.keypoint_point.resize(count);
    out.noiseless.resize(count);
    out.corrupted.assign(count, 0);
    Eigen::VectorXf global = Eigen::VectorXf::Zero(kBuiltinGlobalDim);
    for (int i = 0; i < count; ++i) {
      const auto& v = visible[i];
      out.keypoint_point[i] = v.point;
      out.noiseless[i] = v.pixel;
      Pixel px = v.pixel;
      if (spec.keypoint_noise > 0.0) {
        px.x() += spec.keypoint_noise * rng.Normal();
        px.y() += spec.keypoint_noise * rng.Normal();
        px.x() = std::clamp(px.x(), 0.0, std::nextafter(static_cast<double>(k.width), 0.0));
        px.y() = std::clamp(px.y(), 0.0, std::nextafter(static_cast<double>(k.height), 0.0));
      }
      kps.keypoints[i].position = px;
      kps.keypoints[i].score =
          0.5 + 0.5 * static_cast<double>(Priority(world, v.point) >> 11) * 0x1.0p-53;

      std::uint64_t texture = world.texture_seeds[v.point];
      if (spec.outlier_rate > 0.0 && rng.Uniform() < spec.outlier_rate &&
          world.points.size() > 1) {
        auto other = rng.UniformIndex(world.points.size() - 1);
        if (other >= static_cast<std::uint64_t>(v.point)) ++other;
        texture = world.texture_seeds[other];
        out.corrupted[i] = 1;
      }
      Eigen::VectorXf d = TextureDescriptor(texture, kBuiltinDescriptorDim);
      if (spec.descriptor_noise > 0.0) {
        const double s = spec.descriptor_noise / std::sqrt(double{kBuiltinDescriptorDim});
        for (int c = 0; c < kBuiltinDescriptorDim; ++c) {
          d(c) += static_cast<float>(s * rng.Normal());
        }
        d.normalize();
      }
      kps.descriptors.row(i) = d.transpose();
      global += GlobalTexture(world.texture_seeds[v.point]);
    }
    out.features.global.values = global / global.norm();
  });
  return frames;
}

std::vector<Image> RenderImages(const World& world, const SequenceSpec& spec,
                                const CameraIntrinsics& k) {
  spec.Validate();
  k.Validate();
  const int n = static_cast<int>(spec.trajectory.size());
  std::vector<Image> images(n);
  ParallelFor(n, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    auto visible = VisiblePoints(world, spec, k, f);
    if (visible.empty()) {
      throw EmptyView("frame " + std::to_string(spec.first_frame_id + f) +
                      " sees no world point");
    }
    // Painter's order: far splats first.
    std::stable_sort(visible.begin(), visible.end(),
                     [](const auto& a, const auto& b) { return a.depth > b.depth; });
    Image img(k.width, k.height, 128.0f);
    for (const auto& v : visible) {
      Rng tex(MixSeed(world.texture_seeds[v.point], 0x73706c74));
      const double half = std::clamp(0.04 * k.fx / v.depth, 2.5, 9.0);
      const double theta = tex.Uniform(0.0, std::numbers::pi / 2.0);
      float shade[4];
      for (float& s : shade) {
        const double level = tex.Uniform(30.0, 95.0);
        s = static_cast<float>(tex.Uniform() < 0.5 ? level : 255.0 - level);
      }
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      const double reach = half * std::sqrt(2.0);
      const int x0 = std::max(0, static_cast<int>(std::floor(v.pixel.x() - reach)));
      const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(v.pixel.x() + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(v.pixel.y() - reach)));
      const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(v.pixel.y() + reach)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = x + 0.5 - v.pixel.x();
          const double dy = y + 0.5 - v.pixel.y();
          const double u = c * dx + s * dy;
          const double w = -s * dx + c * dy;
          if (std::abs(u) > half || std::abs(w) > half) continue;
          img.at(x, y) = shade[(u > 0.0 ? 1 : 0) + (w > 0.0 ? 2 : 0)];
        }
      }
    }
    images[f] = Degrade(img, spec.blur_sigma, spec.image_noise,
                        MixSeed(spec.seed, 0x696d67000000ULL + static_cast<std::uint64_t>(f)));
  });
  return images;
}

}  // namespace anchorloc
