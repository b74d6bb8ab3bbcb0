#pragma once

#include <map>
#include <string>
#include <vector>

#include "anchorloc/pose_io.h"

namespace anchorloc {

struct Threshold {
  double translation = 0.0;   // scene units
  double rotation_deg = 0.0;  // degrees
};

// (0.05, 5), (0.1, 5), (0.5, 15).
std::vector<Threshold> DefaultThresholds();

struct FrameError {
  FrameId frame_id = 0;
  double translation = 0.0;
  double rotation_deg = 0.0;
};

struct MetricsReport {
  std::size_t num_frames = 0;  // ground-truth frames
  std::size_t num_localized = 0;
  std::size_t num_unlocalized = 0;
  // Over localized frames only; NaN when nothing was localized. Standard
  // deviations are population deviations.
  double median_translation = 0.0;
  double median_rotation_deg = 0.0;
  double mean_translation = 0.0;
  double std_translation = 0.0;
  double mean_rotation_deg = 0.0;
  double std_rotation_deg = 0.0;
  std::vector<Threshold> thresholds;
  // Percent of all ground-truth frames within both bounds; unlocalized
  // frames count as failures.
  std::vector<double> accuracy;
  // Percent of localized frames within both bounds.
  std::vector<double> accuracy_localized;
  std::vector<FrameError> per_frame;  // localized frames, ascending id
  std::map<std::string, double> timings_sec;
};

// Throws MissingGroundTruth listing estimated ids absent from gt.
MetricsReport Evaluate(const Trajectory& estimate, const Trajectory& ground_truth,
                       const std::vector<Threshold>& thresholds = DefaultThresholds());

std::string MetricsToJson(const MetricsReport& report);
// Human readable summary with both accuracy conventions labeled.
std::string FormatMetrics(const MetricsReport& report);

}  // namespace anchorloc
