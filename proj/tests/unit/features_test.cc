#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/features.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace anchorloc {
namespace {

KeypointSet RandomSet(Rng& rng, int n, int dim = 32) {
  KeypointSet s;
  s.keypoints.resize(n);
  s.descriptors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) s.descriptors(i, j) = static_cast<float>(rng.Normal());
    s.descriptors.row(i).normalize();
  }
  return s;
}

// Mutual nearest neighbours passing the distance-ratio test both ways.
std::set<std::pair<int, int>> BruteForceMatches(const KeypointSet& a, const KeypointSet& b,
                                                double ratio) {
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  Eigen::MatrixXd d(na, nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      d(i, j) = (a.descriptors.row(i).cast<double>() - b.descriptors.row(j).cast<double>()).norm();
    }
  }
  auto two_best = [](const Eigen::VectorXd& v) {
    int best = 0;
    for (int k = 1; k < v.size(); ++k) {
      if (v(k) < v(best)) best = k;
    }
    double second = std::numeric_limits<double>::infinity();
    for (int k = 0; k < v.size(); ++k) {
      if (k != best) second = std::min(second, v(k));
    }
    return std::make_pair(best, second);
  };
  std::set<std::pair<int, int>> out;
  for (int i = 0; i < na; ++i) {
    const auto [j, row_second] = two_best(d.row(i).transpose());
    const auto [back, col_second] = two_best(d.col(j));
    if (back != i) continue;
    if (!(d(i, j) < ratio * row_second) || !(d(i, j) < ratio * col_second)) continue;
    out.insert({i, j});
  }
  return out;
}

TEST(MatcherTest, SelfMatchIsIdentity) {
  Rng rng(1);
  const KeypointSet s = RandomSet(rng, 60);
  const MatchSet m = MatchKeypoints(s, s, 0.9);
  ASSERT_EQ(m.size(), s.size());
  for (const auto& x : m) {
    EXPECT_EQ(x.i, x.j);
    EXPECT_NEAR(x.score, 1.0, 1e-6);
  }
}

TEST(MatcherTest, EmptySideGivesNoMatches) {
  Rng rng(2);
  EXPECT_TRUE(MatchKeypoints(RandomSet(rng, 1), KeypointSet{}, 0.9).empty());
  EXPECT_TRUE(MatchKeypoints(KeypointSet{}, RandomSet(rng, 3), 0.9).empty());
}

TEST(MatcherTest, AgreesWithBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    KeypointSet a = RandomSet(rng, 80, 16);
    KeypointSet b = RandomSet(rng, 70, 16);
    // Plant noisy copies so that a good share of rows have true partners.
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 16; ++j) {
        b.descriptors(i, j) = a.descriptors(i + 5, j) + static_cast<float>(0.1 * rng.Normal());
      }
      b.descriptors.row(i).normalize();
    }
    for (double ratio : {0.6, 0.8, 1.0}) {
      std::set<std::pair<int, int>> got;
      for (const auto& m : MatchKeypoints(a, b, ratio)) got.insert({m.i, m.j});
      EXPECT_EQ(got, BruteForceMatches(a, b, ratio)) << "trial " << trial << " ratio " << ratio;
    }
  }
}

TEST(MatcherTest, SymmetricUnderSwap) {
  Rng rng(4);
  const KeypointSet a = RandomSet(rng, 50);
  KeypointSet b = RandomSet(rng, 50);
  b.descriptors.topRows(30) = a.descriptors.topRows(30);
  std::set<std::pair<int, int>> ab, ba;
  for (const auto& m : MatchKeypoints(a, b)) ab.insert({m.i, m.j});
  for (const auto& m : MatchKeypoints(b, a)) ba.insert({m.j, m.i});
  EXPECT_EQ(ab, ba);
}

TEST(MatcherTest, Validation) {
  Rng rng(5);
  EXPECT_THROW(MatchKeypoints(RandomSet(rng, 3, 8), RandomSet(rng, 3, 16)), DimensionMismatch);
  EXPECT_THROW(MatchKeypoints(RandomSet(rng, 3), RandomSet(rng, 3), 0.0), InvalidArgument);
  EXPECT_THROW(MatchKeypoints(RandomSet(rng, 3), RandomSet(rng, 3), 1.5), InvalidArgument);
}

TEST(MatcherTest, NearIdenticalRendersMatchCovisibleKeypoints) {
  // A flat textured wall at depth 8 seen from two cameras 0.05 apart: the
  // true correspondence of every pixel is a uniform shift.
  WorldSpec w;
  w.base_points = 500;
  w.cluster_extent = Eigen::Vector3d(6.0, 0.0, 4.5);
  w.texture_seed = 9;
  const World world = GenerateWorld(w);
  const CameraIntrinsics k{300, 300, 160, 120, 320, 240};
  SequenceSpec s;
  const double dx = 0.05;
  for (double x : {0.0, dx}) {
    const Eigen::Vector3d c(x, -8.0, 0.0);
    s.trajectory.push_back(LookAt(c, c + Eigen::Vector3d::UnitY()));
  }
  const auto images = RenderImages(world, s, k);
  const KeypointSet a = DetectAndDescribe(images[0], 512);
  const KeypointSet b = DetectAndDescribe(images[1], 512);
  const Pixel shift(-k.fx * dx / 8.0, 0.0);

  // Keypoints of `a` with a partner in `b` at the predicted location.
  std::vector<int> partner(a.size(), -1);
  int covisible = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Pixel p = a.keypoints[i].position + shift;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if ((b.keypoints[j].position - p).norm() < 1.5) {
        partner[i] = static_cast<int>(j);
        ++covisible;
        break;
      }
    }
  }
  ASSERT_GT(covisible, 100);
  int correct = 0;
  for (const auto& m : MatchKeypoints(a, b)) correct += partner[m.i] == m.j;
  EXPECT_GE(correct, 0.8 * covisible) << correct << " of " << covisible;
}

}  // namespace
}  // namespace anchorloc
