#pragma once

#include <vector>

#include <Eigen/Core>

#include "anchorloc/geom.h"

namespace anchorloc {

struct BAObservation {
  int pose_index = 0;
  int landmark_index = 0;
  Pixel pixel = Pixel::Zero();
};

// Poses and landmarks are slots; fixed slots are constants of the problem
// and are never written. At least one pose must be fixed to pin the gauge.
struct BAProblem {
  CameraIntrinsics intrinsics;
  std::vector<Pose> poses;
  std::vector<bool> pose_fixed;
  std::vector<Point3> landmarks;
  std::vector<bool> landmark_fixed;
  std::vector<BAObservation> observations;

  int AddPose(const Pose& pose, bool fixed);
  int AddLandmark(const Point3& point, bool fixed);
  void AddObservation(int pose_index, int landmark_index, const Pixel& pixel);

  int NumVariablePoses() const;
  int NumVariableLandmarks() const;
  // Throws ValidationError on dangling slots or a missing fixed pose.
  void Validate() const;
};

struct BAOptions {
  double huber_scale = 2.0;  // pixels
  int max_iterations = 100;
  double function_tolerance = 1e-10;
  double gradient_tolerance = 1e-10;
};

struct BAReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double initial_rmse = 0.0;  // pixels, unweighted
  double final_rmse = 0.0;
  std::vector<double> rmse_history;  // initial, then after each accepted step
  int iterations = 0;
  int accepted_steps = 0;
};

// Levenberg-Marquardt with the landmark blocks eliminated through the Schur
// complement. Only variable slots of `problem` are modified.
BAReport BundleAdjust(BAProblem& problem, const BAOptions& options = {});

double BACost(const BAProblem& problem, double huber_scale);
double BAReprojectionRmse(const BAProblem& problem);

// Dense residual Jacobian over the variable parameters, ordered as
// [variable poses (6 each, left increment), variable landmarks (3 each)].
// Meant for small problems and diagnostics.
Eigen::MatrixXd BAJacobian(const BAProblem& problem,
                           Eigen::VectorXd* residuals = nullptr);
// Applies a parameter increment laid out as in BAJacobian.
BAProblem ApplyBAIncrement(const BAProblem& problem,
                           const Eigen::VectorXd& delta);

}  // namespace anchorloc
