#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "anchorloc/errors.h"
#include "anchorloc/features.h"

namespace anchorloc {
namespace {

constexpr int kPatchSize = 16;
constexpr int kCellSize = 4;
constexpr int kCells = kPatchSize / kCellSize;
constexpr int kOrientationBins = 8;
static_assert(kCells * kCells * kOrientationBins == kBuiltinDescriptorDim);

struct Gradients {
  int width = 0;
  int height = 0;
  std::vector<double> gx;
  std::vector<double> gy;
};

// Central differences with border replication.
Gradients ComputeGradients(const Image& image) {
  Gradients g;
  g.width = image.width();
  g.height = image.height();
  g.gx.resize(static_cast<size_t>(g.width) * g.height);
  g.gy.resize(g.gx.size());
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * g.width + x;
      g.gx[idx] = 0.5 * (static_cast<double>(image.AtClamped(x + 1, y)) -
                         image.AtClamped(x - 1, y));
      g.gy[idx] = 0.5 * (static_cast<double>(image.AtClamped(x, y + 1)) -
                         image.AtClamped(x, y - 1));
    }
  }
  return g;
}

std::vector<double> SmoothSeparable(const std::vector<double>& src, int w,
                                    int h, double sigma) {
  const auto kernel = GaussianKernel(sigma);
  const int r = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += kernel[i + r] * src[static_cast<size_t>(y) * w +
                                   std::clamp(x + i, 0, w - 1)];
      }
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += kernel[i + r] *
               tmp[static_cast<size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

struct Candidate {
  int x = 0;
  int y = 0;
  double response = 0.0;
  Pixel position;
};

// Offset of the extremum of a parabola through (-1, a), (0, b), (1, c).
double ParabolicOffset(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (std::abs(denom) < 1e-12) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

std::vector<Candidate> SelectByAnms(std::vector<Candidate> candidates,
                                    const DetectorOptions& options) {
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.response != b.response) return a.response > b.response;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });
  if (candidates.size() > static_cast<size_t>(options.max_candidates)) {
    candidates.resize(options.max_candidates);
  }
  const size_t n = candidates.size();
  std::vector<double> radius(n, std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (candidates[i].response < options.anms_robust * candidates[j].response) {
        const double d =
            (candidates[i].position - candidates[j].position).squaredNorm();
        radius[i] = std::min(radius[i], d);
      }
    }
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return radius[a] > radius[b]; });
  if (order.size() > static_cast<size_t>(options.max_keypoints)) {
    order.resize(options.max_keypoints);
  }
  std::sort(order.begin(), order.end());  // back to response order
  std::vector<Candidate> selected;
  selected.reserve(order.size());
  for (size_t idx : order) selected.push_back(candidates[idx]);
  return selected;
}

// Returns false when the patch carries no gradient energy.
bool DescribePatch(const Gradients& g, int cx, int cy, float* out) {
  std::fill(out, out + kBuiltinDescriptorDim, 0.0f);
  double acc[kBuiltinDescriptorDim] = {};
  const double window_sigma = 0.5 * kPatchSize;
  for (int py = 0; py < kPatchSize; ++py) {
    for (int px = 0; px < kPatchSize; ++px) {
      const int x = cx - kPatchSize / 2 + px;
      const int y = cy - kPatchSize / 2 + py;
      const size_t idx = static_cast<size_t>(y) * g.width + x;
      const double gx = g.gx[idx];
      const double gy = g.gy[idx];
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      const double dx = px + 0.5 - 0.5 * kPatchSize;
      const double dy = py + 0.5 - 0.5 * kPatchSize;
      const double weight =
          std::exp(-(dx * dx + dy * dy) / (2.0 * window_sigma * window_sigma));
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      const double bin_f = angle / (2.0 * std::numbers::pi) * kOrientationBins;
      const int bin0 = static_cast<int>(std::floor(bin_f)) % kOrientationBins;
      const int bin1 = (bin0 + 1) % kOrientationBins;
      const double frac = bin_f - std::floor(bin_f);
      const int cell = (py / kCellSize) * kCells + (px / kCellSize);
      acc[cell * kOrientationBins + bin0] += weight * mag * (1.0 - frac);
      acc[cell * kOrientationBins + bin1] += weight * mag * frac;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 1e-12)) return false;
  for (int i = 0; i < kBuiltinDescriptorDim; ++i) {
    out[i] = static_cast<float>(acc[i] / norm);
  }
  return true;
}

}  // namespace

void KeypointSet::Validate(std::size_t max_keypoints, int width,
                           int height) const {
  std::ostringstream err;
  if (static_cast<size_t>(descriptors.rows()) != keypoints.size()) {
    err << "descriptor rows do not match keypoint count; ";
  }
  if (keypoints.size() > max_keypoints) err << "too many keypoints; ";
  for (size_t i = 0; i < keypoints.size(); ++i) {
    const auto& p = keypoints[i].position;
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height)) {
      err << "keypoint " << i << " outside image; ";
      break;
    }
    if (i < static_cast<size_t>(descriptors.rows()) &&
        std::abs(descriptors.row(i).cast<double>().norm() - 1.0) > 1e-6) {
      err << "descriptor " << i << " not unit norm; ";
      break;
    }
  }
  if (!err.str().empty()) throw InvalidArgument("keypoint set: " + err.str());
}

KeypointSet DetectAndDescribe(const Image& image,
                              const DetectorOptions& options) {
  if (image.width() < 32 || image.height() < 32) {
    throw EmptyImage("detect_and_describe needs at least a 32x32 image");
  }
  if (options.max_keypoints < 1) {
    throw InvalidArgument("max_keypoints must be >= 1");
  }
  const int w = image.width();
  const int h = image.height();
  const Gradients g = ComputeGradients(image);

  std::vector<double> ixx(g.gx.size());
  std::vector<double> iyy(g.gx.size());
  std::vector<double> ixy(g.gx.size());
  for (size_t i = 0; i < g.gx.size(); ++i) {
    ixx[i] = g.gx[i] * g.gx[i];
    iyy[i] = g.gy[i] * g.gy[i];
    ixy[i] = g.gx[i] * g.gy[i];
  }
  ixx = SmoothSeparable(ixx, w, h, options.window_sigma);
  iyy = SmoothSeparable(iyy, w, h, options.window_sigma);
  ixy = SmoothSeparable(ixy, w, h, options.window_sigma);

  std::vector<double> response(g.gx.size());
  double max_response = 0.0;
  for (size_t i = 0; i < response.size(); ++i) {
    const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
    const double trace = ixx[i] + iyy[i];
    response[i] = det - options.harris_k * trace * trace;
    max_response = std::max(max_response, response[i]);
  }
  KeypointSet result;
  result.descriptors.resize(0, kBuiltinDescriptorDim);
  const double threshold = std::max(options.absolute_threshold,
                                    options.relative_threshold * max_response);
  if (!(max_response > threshold)) return result;

  auto r_at = [&](int x, int y) { return response[static_cast<size_t>(y) * w + x]; };
  std::vector<Candidate> candidates;
  const int border = std::max(options.border, kPatchSize / 2 + 1);
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const double r = r_at(x, y);
      if (r <= threshold) continue;
      // Strict against earlier neighbours, non-strict against later ones, so
      // plateaus produce exactly one maximum.
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double other = r_at(x + dx, y + dy);
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? other >= r : other > r) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      Candidate c;
      c.x = x;
      c.y = y;
      c.response = r;
      c.position = Pixel(
          x + ParabolicOffset(r_at(x - 1, y), r, r_at(x + 1, y)),
          y + ParabolicOffset(r_at(x, y - 1), r, r_at(x, y + 1)));
      candidates.push_back(c);
    }
  }
  const auto selected = SelectByAnms(std::move(candidates), options);

  std::vector<float> row(kBuiltinDescriptorDim);
  std::vector<std::vector<float>> rows;
  for (const auto& c : selected) {
    if (!DescribePatch(g, c.x, c.y, row.data())) continue;
    result.keypoints.push_back({c.position, c.response / max_response});
    rows.push_back(row);
  }
  result.descriptors.resize(static_cast<Eigen::Index>(rows.size()),
                            kBuiltinDescriptorDim);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < kBuiltinDescriptorDim; ++d) {
      result.descriptors(static_cast<Eigen::Index>(i), d) = rows[i][d];
    }
  }
  return result;
}

}  // namespace anchorloc
