#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "anchorloc/geom.h"
#include "anchorloc/image.h"

namespace anchorloc {

inline constexpr int kBuiltinDescriptorDim = 128;
inline constexpr int kBuiltinGlobalDim = 256;
inline constexpr int kDefaultMaxKeypoints = 512;
inline constexpr double kDefaultRatio = 0.9;

using DescriptorMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Keypoint {
  Pixel position = Pixel::Zero();
  double score = 0.0;  // in [0, 1]
};

// Keypoints with row-aligned unit-norm descriptors (one row per keypoint).
struct KeypointSet {
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;

  std::size_t size() const { return keypoints.size(); }
  bool empty() const { return keypoints.empty(); }
  int descriptor_dim() const { return static_cast<int>(descriptors.cols()); }

  // Throws InvalidArgument when the set violates its invariants: aligned
  // sizes, cap, unit-norm rows, keypoints inside a width x height image.
  void Validate(std::size_t max_keypoints, int width, int height) const;
};

struct GlobalDescriptor {
  Eigen::VectorXf values;
  int dim() const { return static_cast<int>(values.size()); }
};

// Cosine similarity of two unit-norm global descriptors.
double Similarity(const GlobalDescriptor& a, const GlobalDescriptor& b);

struct Match {
  int i = 0;  // index into the first set
  int j = 0;  // index into the second set
  double score = 0.0;
};

// One-to-one pairs sorted by descending score (ties by ascending i).
using MatchSet = std::vector<Match>;

struct DetectorOptions {
  int max_keypoints = kDefaultMaxKeypoints;
  double harris_k = 0.04;
  double window_sigma = 1.5;
  // Candidates must exceed both thresholds: relative to the strongest response
  // and absolute (intensity^4 units for an image in [0, 255]).
  double relative_threshold = 0.01;
  double absolute_threshold = 1e3;
  // Keypoints closer than this to the border are discarded; the 16x16
  // descriptor patch must fit.
  int border = 9;
  // ANMS robustness factor.
  double anms_robust = 0.9;
  int max_candidates = 4000;
};

// Harris corners, adaptive non-maximal suppression and a 128-d gradient
// orientation patch descriptor (4x4 cells x 8 bins over a 16x16 patch).
// Throws EmptyImage when the image is smaller than 32x32. A textureless image
// yields an empty set.
KeypointSet DetectAndDescribe(const Image& image,
                              const DetectorOptions& options = {});
inline KeypointSet DetectAndDescribe(const Image& image, int max_keypoints) {
  DetectorOptions options;
  options.max_keypoints = max_keypoints;
  return DetectAndDescribe(image, options);
}

// Mutual nearest neighbours under cosine similarity that pass the distance
// ratio test in both directions. score = (1 + cos) / 2.
MatchSet MatchKeypoints(const KeypointSet& a, const KeypointSet& b,
                        double ratio = kDefaultRatio);

// 256-d descriptor: a 16x16 mean-subtracted tiny image whose four 8x8
// quadrants are weighted by the orientation coherence of the matching image
// quadrant, L2 normalized. Throws EmptyImage below 32x32.
GlobalDescriptor ComputeGlobalDescriptor(const Image& image);

}  // namespace anchorloc
