#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "anchorloc/errors.h"
#include "anchorloc/features.h"

namespace anchorloc {
namespace {

constexpr int kTiny = 16;
constexpr int kQuadrant = kTiny / 2;
constexpr int kCoherenceBins = 8;

// Box-filtered downsample to kTiny x kTiny using exact area coverage.
std::array<double, kTiny * kTiny> TinyImage(const Image& image) {
  std::array<double, kTiny * kTiny> tiny{};
  const double sx = static_cast<double>(image.width()) / kTiny;
  const double sy = static_cast<double>(image.height()) / kTiny;
  for (int ty = 0; ty < kTiny; ++ty) {
    const double y0 = ty * sy;
    const double y1 = (ty + 1) * sy;
    for (int tx = 0; tx < kTiny; ++tx) {
      const double x0 = tx * sx;
      const double x1 = (tx + 1) * sx;
      double acc = 0.0;
      for (int y = static_cast<int>(std::floor(y0));
           y < std::min<int>(image.height(), static_cast<int>(std::ceil(y1)));
           ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        for (int x = static_cast<int>(std::floor(x0));
             x < std::min<int>(image.width(), static_cast<int>(std::ceil(x1)));
             ++x) {
          const double wx =
              std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          acc += wx * wy * image.at(x, y);
        }
      }
      tiny[ty * kTiny + tx] = acc / (sx * sy);
    }
  }
  return tiny;
}

// Fraction of gradient energy in the dominant unsigned orientation bin of
// each image quadrant. Unsigned orientation makes the weight invariant to
// intensity negation.
std::array<double, 4> QuadrantCoherence(const Image& image) {
  std::array<std::array<double, kCoherenceBins>, 4> hist{};
  const int hw = image.width() / 2;
  const int hh = image.height() / 2;
  for (int y = 1; y + 1 < image.height(); ++y) {
    for (int x = 1; x + 1 < image.width(); ++x) {
      const double gx = 0.5 * (static_cast<double>(image.at(x + 1, y)) -
                               image.at(x - 1, y));
      const double gy = 0.5 * (static_cast<double>(image.at(x, y + 1)) -
                               image.at(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += std::numbers::pi;
      int bin = static_cast<int>(angle / std::numbers::pi * kCoherenceBins);
      bin = std::clamp(bin, 0, kCoherenceBins - 1);
      const int q = (y < hh ? 0 : 2) + (x < hw ? 0 : 1);
      hist[q][bin] += mag;
    }
  }
  std::array<double, 4> coherence{};
  for (int q = 0; q < 4; ++q) {
    double total = 0.0;
    double peak = 0.0;
    for (double v : hist[q]) {
      total += v;
      peak = std::max(peak, v);
    }
    coherence[q] = total > 0.0 ? peak / total : 0.0;
  }
  return coherence;
}

}  // namespace

GlobalDescriptor ComputeGlobalDescriptor(const Image& image) {
  if (image.width() < 32 || image.height() < 32) {
    throw EmptyImage("global descriptor needs at least a 32x32 image");
  }
  auto tiny = TinyImage(image);
  double mean = 0.0;
  for (double v : tiny) mean += v;
  mean /= tiny.size();
  const auto coherence = QuadrantCoherence(image);

  // Output layout: quadrant-major, 64 values per quadrant.
  Eigen::VectorXd g(kBuiltinGlobalDim);
  for (int q = 0; q < 4; ++q) {
    const double weight = 1.0 + coherence[q];
    const int qx = (q % 2) * kQuadrant;
    const int qy = (q / 2) * kQuadrant;
    for (int y = 0; y < kQuadrant; ++y) {
      for (int x = 0; x < kQuadrant; ++x) {
        g(q * kQuadrant * kQuadrant + y * kQuadrant + x) =
            weight * (tiny[(qy + y) * kTiny + qx + x] - mean);
      }
    }
  }
  const double norm = g.norm();
  GlobalDescriptor out;
  if (norm > 1e-12) {
    out.values = (g / norm).cast<float>();
  } else {
    // Constant image: no structure to encode; use the uniform unit vector.
    out.values = Eigen::VectorXf::Constant(kBuiltinGlobalDim,
                                           1.0f / std::sqrt(256.0f));
  }
  return out;
}

}  // namespace anchorloc
