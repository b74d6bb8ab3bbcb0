#include <algorithm>
#include <cmath>
#include <limits>

#include "anchorloc/errors.h"
#include "anchorloc/features.h"

namespace anchorloc {
namespace {

struct Best {
  int index = -1;
  float sim = -std::numeric_limits<float>::infinity();
  float second = -std::numeric_limits<float>::infinity();
};

inline void Update(Best& best, int index, float sim) {
  if (sim > best.sim) {
    best.second = best.sim;
    best.sim = sim;
    best.index = index;
  } else if (sim > best.second) {
    best.second = sim;
  }
}

// Distance between unit vectors from their cosine similarity.
inline double Distance(double sim) {
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * sim));
}

bool PassesRatio(const Best& best, double ratio) {
  if (best.second == -std::numeric_limits<float>::infinity()) return true;
  return Distance(best.sim) < ratio * Distance(best.second);
}

bool CanonicalFirst(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size()) ||
         std::equal(a.data(), a.data() + a.size(), b.data());
}

}  // namespace

double Similarity(const GlobalDescriptor& a, const GlobalDescriptor& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("global descriptors differ in width");
  }
  return static_cast<double>(a.values.cast<double>().dot(b.values.cast<double>()));
}

MatchSet MatchKeypoints(const KeypointSet& a, const KeypointSet& b,
                        double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("ratio must lie in (0, 1]");
  }
  MatchSet matches;
  if (a.empty() || b.empty()) return matches;
  if (a.descriptor_dim() != b.descriptor_dim()) {
    throw DimensionMismatch("descriptor widths differ between keypoint sets");
  }
  // The product is always evaluated in one canonical operand order so that
  // match(a, b) and match(b, a) see bit-identical similarities.
  const Eigen::MatrixXf sim = CanonicalFirst(a.descriptors, b.descriptors)
                                  ? Eigen::MatrixXf(a.descriptors *
                                                    b.descriptors.transpose())
                                  : Eigen::MatrixXf((b.descriptors *
                                                     a.descriptors.transpose())
                                                        .transpose());
  const int na = static_cast<int>(sim.rows());
  const int nb = static_cast<int>(sim.cols());
  std::vector<Best> row_best(na);
  std::vector<Best> col_best(nb);
  for (int j = 0; j < nb; ++j) {
    for (int i = 0; i < na; ++i) {
      const float s = sim(i, j);
      Update(row_best[i], j, s);
      Update(col_best[j], i, s);
    }
  }
  for (int i = 0; i < na; ++i) {
    const Best& rb = row_best[i];
    if (rb.index < 0) continue;
    const Best& cb = col_best[rb.index];
    if (cb.index != i) continue;
    if (!PassesRatio(rb, ratio) || !PassesRatio(cb, ratio)) continue;
    const double score = std::clamp(0.5 * (1.0 + rb.sim), 0.0, 1.0);
    matches.push_back({i, rb.index, score});
  }
  std::stable_sort(matches.begin(), matches.end(),
                   [](const Match& x, const Match& y) { return x.score > y.score; });
  return matches;
}

}  // namespace anchorloc
