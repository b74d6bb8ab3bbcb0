#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "anchorloc/errors.h"
#include "anchorloc/pnp.h"

namespace anchorloc {
namespace {

using Poly = std::array<double, 5>;  // coefficients, index = power

Poly Mul(const Poly& a, const Poly& b) {
  Poly out{};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; i + j < 5; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

Poly Add(const Poly& a, const Poly& b, double sb = 1.0) {
  Poly out{};
  for (int i = 0; i < 5; ++i) out[i] = a[i] + sb * b[i];
  return out;
}

Poly Scale(const Poly& a, double s) {
  Poly out{};
  for (int i = 0; i < 5; ++i) out[i] = a[i] * s;
  return out;
}

double Eval(const Poly& p, double x) {
  double v = 0.0;
  for (int i = 4; i >= 0; --i) v = v * x + p[i];
  return v;
}

double EvalDerivative(const Poly& p, double x) {
  double v = 0.0;
  for (int i = 4; i >= 1; --i) v = v * x + i * p[i];
  return v;
}

// Real roots of a polynomial of degree <= 4 via companion matrix
// eigenvalues, polished with Newton steps.
std::vector<double> RealRoots(const Poly& p) {
  int degree = 4;
  const double scale = std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2]),
                                 std::abs(p[3]), std::abs(p[4])});
  if (scale == 0.0) return {};
  while (degree > 0 && std::abs(p[degree]) <= 1e-14 * scale) --degree;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) {
    companion(0, i) = -p[degree - 1 - i] / p[degree];
  }
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const std::complex<double> z = solver.eigenvalues()(i);
    // Nearly double roots come back as complex pairs with tiny imaginary
    // parts; keep them and let the polish and the geometric checks decide.
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 8; ++it) {
      const double d = EvalDerivative(p, x);
      if (d == 0.0) break;
      const double step = Eval(p, x) / d;
      x -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Rigid transform mapping world points onto camera-frame points (Kabsch).
Pose AlignPoints(const std::array<Eigen::Vector3d, 3>& world,
                 const std::array<Eigen::Vector3d, 3>& camera) {
  Eigen::Vector3d cw = Eigen::Vector3d::Zero();
  Eigen::Vector3d cc = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    cw += world[i];
    cc += camera[i];
  }
  cw /= 3.0;
  cc /= 3.0;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) h += (world[i] - cw) * (camera[i] - cc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return Pose(r, cc - r * cw);
}

}  // namespace

std::vector<Pose> SolveP3P(std::span<const Correspondence2D3D> three,
                           const CameraIntrinsics& k) {
  if (three.size() != 3) {
    throw InvalidArgument("P3P needs exactly three correspondences");
  }
  const Eigen::Vector3d& p1 = three[0].point;
  const Eigen::Vector3d& p2 = three[1].point;
  const Eigen::Vector3d& p3 = three[2].point;
  if (!(0.5 * (p2 - p1).cross(p3 - p1).norm() > 1e-12)) {
    throw DegenerateConfiguration("P3P world points are collinear");
  }
  const Eigen::Vector3d f1 = k.Bearing(three[0].pixel);
  const Eigen::Vector3d f2 = k.Bearing(three[1].pixel);
  const Eigen::Vector3d f3 = k.Bearing(three[2].pixel);

  // Distances along the bearings: s2 = u * s1, s3 = v * s1. Side lengths are
  // normalized by b = |P1 - P3| for conditioning.
  const double b = (p1 - p3).norm();
  const double a2 = (p2 - p3).squaredNorm() / (b * b);
  const double c2 = (p1 - p2).squaredNorm() / (b * b);
  const double cos_alpha = f2.dot(f3);
  const double cos_beta = f1.dot(f3);
  const double cos_gamma = f1.dot(f2);

  // B(v) = 1 + v^2 - 2 v cos(beta)  (proportional to |P1 - P3|^2 / s1^2)
  const Poly bv{1.0, -2.0 * cos_beta, 1.0, 0.0, 0.0};
  // Subtracting the two quadratics in u leaves u = N(v) / D(v).
  const Poly n = Add(Add(Poly{-1.0, 0.0, 1.0, 0.0, 0.0}, Scale(bv, c2 - a2)),
                     Poly{});
  const Poly dn{-2.0 * cos_gamma, 2.0 * cos_alpha, 0.0, 0.0, 0.0};
  // (1 + u^2 - 2u cos(gamma)) = c2 * B(v), multiplied through by D^2.
  const Poly lhs = Add(Add(Mul(n, n), Scale(Mul(n, dn), -2.0 * cos_gamma)),
                       Mul(Add(Poly{1.0, 0, 0, 0, 0}, Scale(bv, c2), -1.0),
                           Mul(dn, dn)));

  std::vector<Pose> solutions;
  auto add = [&](double u, double v) {
    // Newton polish on the two distance ratios; roots of the eliminated
    // quartic lose precision near multiple roots.
    for (int it = 0; it < 5; ++it) {
      const double bvv = Eval(bv, v);
      const Eigen::Vector2d f(1.0 + u * u - 2.0 * u * cos_gamma - c2 * bvv,
                              u * u + v * v - 2.0 * u * v * cos_alpha - a2 * bvv);
      const double dbv = 2.0 * v - 2.0 * cos_beta;
      Eigen::Matrix2d j;
      j << 2.0 * u - 2.0 * cos_gamma, -c2 * dbv,
          2.0 * u - 2.0 * v * cos_alpha, 2.0 * v - 2.0 * u * cos_alpha - a2 * dbv;
      const double det = j.determinant();
      if (!(std::abs(det) > 1e-14) || f.norm() < 1e-15) break;
      const Eigen::Vector2d step = j.inverse() * f;
      u -= step.x();
      v -= step.y();
    }
    if (!(u > 0.0) || !(v > 0.0)) return;
    const double bvv = Eval(bv, v);
    if (!(bvv > 0.0)) return;
    const double s1 = b / std::sqrt(bvv);
    const std::array<Eigen::Vector3d, 3> camera = {s1 * f1, u * s1 * f2, v * s1 * f3};
    // Spurious roots of the eliminated system (e.g. where D(v) vanishes)
    // do not reproduce all three side lengths.
    const double tol = 1e-6 * b;
    if (std::abs((camera[0] - camera[1]).norm() - (p1 - p2).norm()) > tol ||
        std::abs((camera[1] - camera[2]).norm() - (p2 - p3).norm()) > tol ||
        std::abs((camera[0] - camera[2]).norm() - (p1 - p3).norm()) > tol) {
      return;
    }
    const std::array<Eigen::Vector3d, 3> world = {p1, p2, p3};
    Pose pose = AlignPoints(world, camera);
    if (!pose.translation().allFinite()) return;
    for (const auto& s : solutions) {
      if (RotationErrorDeg(s, pose) < 1e-9 &&
          (s.translation() - pose.translation()).norm() < 1e-9 * (1.0 + b)) {
        return;
      }
    }
    solutions.push_back(pose);
  };
  for (const double v : RealRoots(lhs)) {
    if (!(v > 0.0)) continue;
    const double d = Eval(dn, v);
    if (std::abs(d) >= 1e-12) add(Eval(n, v) / d, v);
    if (std::abs(d) >= 1e-6) continue;
    // D(v) near 0: u is poorly determined by the difference equation; also
    // try both roots of 1 + u^2 - 2u cos(gamma) = c2 B(v).
    const double disc = cos_gamma * cos_gamma - 1.0 + c2 * Eval(bv, v);
    if (disc < 0.0) continue;
    add(cos_gamma + std::sqrt(disc), v);
    add(cos_gamma - std::sqrt(disc), v);
  }
  return solutions;
}

std::optional<Pose> SolvePnPDlt(std::span<const Correspondence2D3D> c,
                                const CameraIntrinsics& k) {
  if (c.size() < 6) return std::nullopt;
  // Hartley-style normalization of the world points.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& x : c) centroid += x.point;
  centroid /= static_cast<double>(c.size());
  double spread = 0.0;
  for (const auto& x : c) spread += (x.point - centroid).norm();
  spread /= static_cast<double>(c.size());
  if (!(spread > 1e-12)) return std::nullopt;
  const double s = std::sqrt(3.0) / spread;

  Eigen::MatrixXd a(2 * c.size(), 12);
  for (size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector3d xn = (c[i].point - centroid) * s;
    const Eigen::Vector4d xh(xn.x(), xn.y(), xn.z(), 1.0);
    const double u = (c[i].pixel.x() - k.cx) / k.fx;
    const double v = (c[i].pixel.y() - k.cy) / k.fy;
    a.row(2 * i) << xh.transpose(), Eigen::RowVector4d::Zero(), -u * xh.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), xh.transpose(), -v * xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(),
      p.segment<4>(8).transpose();
  Eigen::Matrix3d m = proj.leftCols<3>();
  Eigen::Vector3d t = proj.col(3);
  if (m.determinant() < 0.0) {
    m = -m;
    t = -t;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = rsvd.singularValues().mean();
  if (!(scale > 1e-12)) return std::nullopt;
  const Eigen::Matrix3d r = rsvd.matrixU() * rsvd.matrixV().transpose();
  t /= scale;
  // Undo normalization: x_n = s (X - centroid)  =>  t' = t - R * s * centroid,
  // with the world scale s folded back into the translation.
  const Eigen::Vector3d t_world = t / s - r * centroid;
  const Pose pose(r, t_world);
  if (!pose.rotation().coeffs().allFinite() || !pose.translation().allFinite()) {
    return std::nullopt;
  }
  return pose;
}

}  // namespace anchorloc
