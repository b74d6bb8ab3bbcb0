#include <vector>

#include <benchmark/benchmark.h>

#include "anchorloc/bundle_adjustment.h"
#include "anchorloc/features.h"
#include "anchorloc/pnp.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace {

using namespace anchorloc;

const CameraIntrinsics kCamera{500.0, 500.0, 320.0, 240.0, 640, 480};

Pose RandomPose(Rng& rng) {
  const Eigen::Vector3d c(rng.Uniform(-3, 3), rng.Uniform(-3, 3), rng.Uniform(-3, 3));
  const Eigen::Vector3d target(rng.Uniform(-1, 1), rng.Uniform(-1, 1), rng.Uniform(-1, 1));
  return LookAt(c + Eigen::Vector3d(0, -8, 0), target);
}

// `inliers` exact correspondences followed by `outliers` random ones.
std::vector<Correspondence2D3D> Correspondences(Rng& rng, const Pose& pose, int inliers,
                                                int outliers) {
  std::vector<Correspondence2D3D> out;
  const Pose inv = pose.Inverse();
  for (int i = 0; i < inliers + outliers; ++i) {
    const Pixel px(rng.Uniform(0, kCamera.width), rng.Uniform(0, kCamera.height));
    Correspondence2D3D c;
    c.point = inv.Transform(kCamera.Bearing(px).normalized() * rng.Uniform(2.0, 10.0));
    c.pixel = i < inliers
                  ? px
                  : Pixel(rng.Uniform(0, kCamera.width), rng.Uniform(0, kCamera.height));
    if (i < inliers) c.pixel = *Project(pose, kCamera, c.point);
    out.push_back(c);
  }
  return out;
}

void BM_P3P(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::vector<Correspondence2D3D>> instances;
  for (int i = 0; i < 256; ++i) instances.push_back(Correspondences(rng, RandomPose(rng), 3, 0));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(SolveP3P(instances[i++ % instances.size()], kCamera));
  }
}
BENCHMARK(BM_P3P);

void BM_Ransac(benchmark::State& state) {
  Rng rng(2);
  const int n = static_cast<int>(state.range(0));
  const auto c = Correspondences(rng, RandomPose(rng), n * 7 / 10, n - n * 7 / 10);
  RansacParams params;
  params.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(EstimatePoseRansac(c, kCamera, params));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Ransac)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

KeypointSet RandomKeypoints(Rng& rng, int n) {
  KeypointSet s;
  s.keypoints.resize(n);
  s.descriptors.resize(n, kBuiltinDescriptorDim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kBuiltinDescriptorDim; ++j) {
      s.descriptors(i, j) = static_cast<float>(rng.Normal());
    }
    s.descriptors.row(i).normalize();
  }
  return s;
}

void BM_Match(benchmark::State& state) {
  Rng rng(4);
  const int n = static_cast<int>(state.range(0));
  const KeypointSet a = RandomKeypoints(rng, n);
  KeypointSet b = RandomKeypoints(rng, n);
  b.descriptors.topRows(n / 2) = a.descriptors.topRows(n / 2);
  for (auto _ : state) benchmark::DoNotOptimize(MatchKeypoints(a, b));
}
BENCHMARK(BM_Match)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_BundleAdjust(benchmark::State& state) {
  Rng rng(5);
  const int views = static_cast<int>(state.range(0));
  const int points = 200;
  BAProblem base;
  base.intrinsics = kCamera;
  std::vector<Pose> truth;
  for (int v = 0; v < views; ++v) {
    const double a = -0.5 + 1.0 * v / (views - 1);
    truth.push_back(LookAt(Eigen::Vector3d(6 * std::sin(a), -6 * std::cos(a), 0.5),
                           Point3::Zero()));
    Vector6d d;
    d << 0.01 * rng.Normal(), 0.01 * rng.Normal(), 0.01 * rng.Normal(), 0.02 * rng.Normal(),
        0.02 * rng.Normal(), 0.02 * rng.Normal();
    base.AddPose(v == 0 ? truth.back() : truth.back().Perturbed(d), v == 0);
  }
  for (int i = 0; i < points; ++i) {
    const Point3 x(rng.Uniform(-1, 1), rng.Uniform(-1, 1), rng.Uniform(-1, 1));
    base.AddLandmark(x + 0.02 * Point3(rng.Normal(), rng.Normal(), rng.Normal()), i < 20);
    for (int v = 0; v < views; ++v) {
      base.AddObservation(v, i, *Project(truth[v], kCamera, x) + Pixel(rng.Normal(), rng.Normal()));
    }
  }
  for (auto _ : state) {
    BAProblem p = base;
    benchmark::DoNotOptimize(BundleAdjust(p));
  }
}
BENCHMARK(BM_BundleAdjust)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
