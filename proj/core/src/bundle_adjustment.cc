#include "anchorloc/bundle_adjustment.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "anchorloc/errors.h"
#include "anchorloc/pnp.h"

namespace anchorloc {
namespace {

constexpr double kBehindPenalty = 1e12;

using Mat66 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

// Index of each slot among the variable ones, -1 when fixed.
std::vector<int> VariableIndex(const std::vector<bool>& fixed) {
  std::vector<int> index(fixed.size(), -1);
  int next = 0;
  for (size_t i = 0; i < fixed.size(); ++i) {
    if (!fixed[i]) index[i] = next++;
  }
  return index;
}

double HuberWeight(double norm, double scale) {
  return norm <= scale ? 1.0 : scale / norm;
}

}  // namespace

int BAProblem::AddPose(const Pose& pose, bool fixed) {
  poses.push_back(pose);
  pose_fixed.push_back(fixed);
  return static_cast<int>(poses.size()) - 1;
}

int BAProblem::AddLandmark(const Point3& point, bool fixed) {
  landmarks.push_back(point);
  landmark_fixed.push_back(fixed);
  return static_cast<int>(landmarks.size()) - 1;
}

void BAProblem::AddObservation(int pose_index, int landmark_index,
                               const Pixel& pixel) {
  observations.push_back({pose_index, landmark_index, pixel});
}

int BAProblem::NumVariablePoses() const {
  return static_cast<int>(std::count(pose_fixed.begin(), pose_fixed.end(), false));
}

int BAProblem::NumVariableLandmarks() const {
  return static_cast<int>(
      std::count(landmark_fixed.begin(), landmark_fixed.end(), false));
}

void BAProblem::Validate() const {
  intrinsics.Validate();
  if (pose_fixed.size() != poses.size() ||
      landmark_fixed.size() != landmarks.size()) {
    throw ValidationError("bundle adjustment: fixed flags do not match slots");
  }
  if (std::find(pose_fixed.begin(), pose_fixed.end(), true) == pose_fixed.end()) {
    throw ValidationError("bundle adjustment: no fixed pose, gauge is free");
  }
  for (const auto& o : observations) {
    if (o.pose_index < 0 || o.pose_index >= static_cast<int>(poses.size()) ||
        o.landmark_index < 0 ||
        o.landmark_index >= static_cast<int>(landmarks.size())) {
      throw ValidationError("bundle adjustment: observation references a missing slot");
    }
  }
}

double BACost(const BAProblem& problem, double huber_scale) {
  double cost = 0.0;
  Eigen::Vector2d r;
  for (const auto& o : problem.observations) {
    if (!ReprojectionResidual(problem.poses[o.pose_index], problem.intrinsics,
                              problem.landmarks[o.landmark_index], o.pixel, &r)) {
      cost += kBehindPenalty;
      continue;
    }
    cost += HuberCost(r.squaredNorm(), huber_scale);
  }
  return cost;
}

double BAReprojectionRmse(const BAProblem& problem) {
  if (problem.observations.empty()) return 0.0;
  double sum = 0.0;
  Eigen::Vector2d r;
  for (const auto& o : problem.observations) {
    if (!ReprojectionResidual(problem.poses[o.pose_index], problem.intrinsics,
                              problem.landmarks[o.landmark_index], o.pixel, &r)) {
      return std::numeric_limits<double>::infinity();
    }
    sum += r.squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(problem.observations.size()));
}

Eigen::MatrixXd BAJacobian(const BAProblem& problem, Eigen::VectorXd* residuals) {
  const auto pose_var = VariableIndex(problem.pose_fixed);
  const auto lm_var = VariableIndex(problem.landmark_fixed);
  const int np = problem.NumVariablePoses();
  const int nl = problem.NumVariableLandmarks();
  const int m = static_cast<int>(problem.observations.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * m, 6 * np + 3 * nl);
  if (residuals) residuals->setZero(2 * m);
  Eigen::Vector2d r;
  Eigen::Matrix<double, 2, 6> jp;
  Eigen::Matrix<double, 2, 3> jl;
  for (int i = 0; i < m; ++i) {
    const auto& o = problem.observations[i];
    ReprojectionResidual(problem.poses[o.pose_index], problem.intrinsics,
                         problem.landmarks[o.landmark_index], o.pixel, &r, &jp,
                         &jl);
    if (residuals) residuals->segment<2>(2 * i) = r;
    if (pose_var[o.pose_index] >= 0) {
      j.block<2, 6>(2 * i, 6 * pose_var[o.pose_index]) = jp;
    }
    if (lm_var[o.landmark_index] >= 0) {
      j.block<2, 3>(2 * i, 6 * np + 3 * lm_var[o.landmark_index]) = jl;
    }
  }
  return j;
}

BAProblem ApplyBAIncrement(const BAProblem& problem, const Eigen::VectorXd& delta) {
  const int np = problem.NumVariablePoses();
  const int nl = problem.NumVariableLandmarks();
  if (delta.size() != 6 * np + 3 * nl) {
    throw DimensionMismatch("bundle adjustment increment has the wrong size");
  }
  BAProblem out = problem;
  int p = 0;
  for (size_t i = 0; i < out.poses.size(); ++i) {
    if (out.pose_fixed[i]) continue;
    out.poses[i] = out.poses[i].Perturbed(delta.segment<6>(6 * p++));
  }
  int l = 0;
  for (size_t i = 0; i < out.landmarks.size(); ++i) {
    if (out.landmark_fixed[i]) continue;
    out.landmarks[i] += delta.segment<3>(6 * np + 3 * l++);
  }
  return out;
}

BAReport BundleAdjust(BAProblem& problem, const BAOptions& options) {
  problem.Validate();
  BAReport report;
  report.initial_cost = BACost(problem, options.huber_scale);
  report.initial_rmse = BAReprojectionRmse(problem);
  report.final_cost = report.initial_cost;
  report.final_rmse = report.initial_rmse;
  report.rmse_history.push_back(report.initial_rmse);

  const auto pose_var = VariableIndex(problem.pose_fixed);
  const auto lm_var = VariableIndex(problem.landmark_fixed);
  const int np = problem.NumVariablePoses();
  const int nl = problem.NumVariableLandmarks();
  if (np == 0 && nl == 0) return report;

  // Observations grouped per variable landmark for the Schur elimination.
  std::vector<std::vector<int>> lm_obs(nl);
  for (size_t i = 0; i < problem.observations.size(); ++i) {
    const int l = lm_var[problem.observations[i].landmark_index];
    if (l >= 0) lm_obs[l].push_back(static_cast<int>(i));
  }

  double cost = report.initial_cost;
  double rmse = report.initial_rmse;
  double lambda = 1e-4;
  std::vector<Mat66> u(np);
  std::vector<Vector6d> gp(np);
  std::vector<Eigen::Matrix3d> v(nl);
  std::vector<Eigen::Vector3d> gl(nl);
  // W blocks keyed by observation; several observations of the same
  // (pose, landmark) pair simply add up in the Schur product below.
  std::vector<Mat63> w(problem.observations.size());

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    report.iterations = iter + 1;
    std::fill(u.begin(), u.end(), Mat66::Zero());
    std::fill(gp.begin(), gp.end(), Vector6d::Zero());
    std::fill(v.begin(), v.end(), Eigen::Matrix3d::Zero());
    std::fill(gl.begin(), gl.end(), Eigen::Vector3d::Zero());
    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 6> jp;
    Eigen::Matrix<double, 2, 3> jl;
    for (size_t i = 0; i < problem.observations.size(); ++i) {
      const auto& o = problem.observations[i];
      w[i].setZero();
      if (!ReprojectionResidual(problem.poses[o.pose_index], problem.intrinsics,
                                problem.landmarks[o.landmark_index], o.pixel, &r,
                                &jp, &jl)) {
        continue;
      }
      const double wt = HuberWeight(r.norm(), options.huber_scale);
      const int p = pose_var[o.pose_index];
      const int l = lm_var[o.landmark_index];
      if (p >= 0) {
        u[p].noalias() += wt * jp.transpose() * jp;
        gp[p].noalias() += wt * jp.transpose() * r;
      }
      if (l >= 0) {
        v[l].noalias() += wt * jl.transpose() * jl;
        gl[l].noalias() += wt * jl.transpose() * r;
      }
      if (p >= 0 && l >= 0) w[i].noalias() = wt * jp.transpose() * jl;
    }
    double grad_norm = 0.0;
    for (const auto& g : gp) grad_norm = std::max(grad_norm, g.lpNorm<Eigen::Infinity>());
    for (const auto& g : gl) grad_norm = std::max(grad_norm, g.lpNorm<Eigen::Infinity>());
    if (grad_norm < options.gradient_tolerance || cost == 0.0) break;

    bool accepted = false;
    bool converged = false;
    while (!accepted) {
      if (lambda > 1e16) {
        converged = true;
        break;
      }
      // Damped landmark blocks and their inverses.
      std::vector<Eigen::Matrix3d> v_inv(nl);
      for (int l = 0; l < nl; ++l) {
        Eigen::Matrix3d vd = v[l];
        vd.diagonal() += lambda * (v[l].diagonal().array() + 1e-9).matrix();
        v_inv[l] = vd.inverse();
      }
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6 * np, 6 * np);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(6 * np);
      for (int p = 0; p < np; ++p) {
        Mat66 ud = u[p];
        ud.diagonal() += lambda * (u[p].diagonal().array() + 1e-9).matrix();
        s.block<6, 6>(6 * p, 6 * p) = ud;
        b.segment<6>(6 * p) = -gp[p];
      }
      for (int l = 0; l < nl; ++l) {
        // Sum W blocks per pose for this landmark.
        std::vector<std::pair<int, Mat63>> wl;
        for (int oi : lm_obs[l]) {
          const int p = pose_var[problem.observations[oi].pose_index];
          if (p < 0) continue;
          auto it = std::find_if(wl.begin(), wl.end(),
                                 [p](const auto& e) { return e.first == p; });
          if (it == wl.end()) {
            wl.emplace_back(p, w[oi]);
          } else {
            it->second += w[oi];
          }
        }
        for (const auto& [pa, wa] : wl) {
          const Mat63 wa_vinv = wa * v_inv[l];
          b.segment<6>(6 * pa).noalias() += wa_vinv * gl[l];
          for (const auto& [pb, wb] : wl) {
            s.block<6, 6>(6 * pa, 6 * pb).noalias() -= wa_vinv * wb.transpose();
          }
        }
      }
      Eigen::VectorXd dp = Eigen::VectorXd::Zero(6 * np);
      if (np > 0) dp = s.ldlt().solve(b);
      Eigen::VectorXd delta(6 * np + 3 * nl);
      delta.head(6 * np) = dp;
      std::vector<Eigen::Vector3d> rhs_l(gl.begin(), gl.end());
      for (size_t i = 0; i < problem.observations.size(); ++i) {
        const auto& o = problem.observations[i];
        const int p = pose_var[o.pose_index];
        const int l = lm_var[o.landmark_index];
        if (p >= 0 && l >= 0) rhs_l[l].noalias() += w[i].transpose() * dp.segment<6>(6 * p);
      }
      for (int l = 0; l < nl; ++l) {
        delta.segment<3>(6 * np + 3 * l) = -(v_inv[l] * rhs_l[l]);
      }
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      BAProblem candidate = ApplyBAIncrement(problem, delta);
      const double new_cost = BACost(candidate, options.huber_scale);
      // The robust cost drives the solve, but a step must not raise the
      // plain reprojection RMSE either.
      const double new_rmse = new_cost < cost ? BAReprojectionRmse(candidate) : rmse;
      if (new_cost < cost && new_rmse <= rmse) {
        const double decrease = (cost - new_cost) / cost;
        for (size_t i = 0; i < problem.poses.size(); ++i) {
          if (!problem.pose_fixed[i]) problem.poses[i] = candidate.poses[i];
        }
        for (size_t i = 0; i < problem.landmarks.size(); ++i) {
          if (!problem.landmark_fixed[i]) problem.landmarks[i] = candidate.landmarks[i];
        }
        cost = new_cost;
        rmse = new_rmse;
        report.rmse_history.push_back(rmse);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        ++report.accepted_steps;
        if (decrease < options.function_tolerance) converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (converged) break;
  }
  report.final_cost = cost;
  report.final_rmse = rmse;
  return report;
}

}  // namespace anchorloc
