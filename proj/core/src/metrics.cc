#include "anchorloc/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "anchorloc/errors.h"
#include "json.hpp"

namespace anchorloc {
namespace {

double Median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void MeanStd(const std::vector<double>& v, double* mean, double* stddev) {
  if (v.empty()) {
    *mean = *stddev = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  *mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - *mean) * (x - *mean);
  *stddev = std::sqrt(ss / static_cast<double>(v.size()));
}

nlohmann::json Number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<Threshold> DefaultThresholds() { return {{0.05, 5.0}, {0.1, 5.0}, {0.5, 15.0}}; }

MetricsReport Evaluate(const Trajectory& estimate, const Trajectory& ground_truth,
                       const std::vector<Threshold>& thresholds) {
  std::vector<std::int64_t> missing;
  for (const auto& [id, pose] : estimate) {
    if (!ground_truth.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) throw MissingGroundTruth(std::move(missing));

  MetricsReport r;
  r.thresholds = thresholds;
  r.num_frames = ground_truth.size();
  r.num_localized = estimate.size();
  r.num_unlocalized = r.num_frames - r.num_localized;
  std::vector<double> te;
  std::vector<double> re;
  for (const auto& [id, pose] : estimate) {
    const Pose& gt = ground_truth.at(id);
    FrameError e{id, TranslationError(pose, gt), RotationErrorDeg(pose, gt)};
    te.push_back(e.translation);
    re.push_back(e.rotation_deg);
    r.per_frame.push_back(e);
  }
  r.median_translation = Median(te);
  r.median_rotation_deg = Median(re);
  MeanStd(te, &r.mean_translation, &r.std_translation);
  MeanStd(re, &r.mean_rotation_deg, &r.std_rotation_deg);
  for (const auto& t : thresholds) {
    std::size_t hits = 0;
    for (const auto& e : r.per_frame) {
      if (e.translation <= t.translation && e.rotation_deg <= t.rotation_deg) ++hits;
    }
    r.accuracy.push_back(r.num_frames == 0 ? 0.0
                                           : 100.0 * static_cast<double>(hits) /
                                                 static_cast<double>(r.num_frames));
    r.accuracy_localized.push_back(r.num_localized == 0
                                       ? 0.0
                                       : 100.0 * static_cast<double>(hits) /
                                             static_cast<double>(r.num_localized));
  }
  return r;
}

std::string MetricsToJson(const MetricsReport& r) {
  nlohmann::json j;
  j["num_frames"] = r.num_frames;
  j["num_localized"] = r.num_localized;
  j["num_unlocalized"] = r.num_unlocalized;
  j["translation"] = {{"median", Number(r.median_translation)},
                      {"mean", Number(r.mean_translation)},
                      {"std", Number(r.std_translation)}};
  j["rotation_deg"] = {{"median", Number(r.median_rotation_deg)},
                       {"mean", Number(r.mean_rotation_deg)},
                       {"std", Number(r.std_rotation_deg)}};
  j["thresholds"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    j["thresholds"].push_back({{"translation", r.thresholds[i].translation},
                               {"rotation_deg", r.thresholds[i].rotation_deg},
                               {"percent_of_all_frames", r.accuracy[i]},
                               {"percent_of_localized_frames", r.accuracy_localized[i]}});
  }
  j["timings_sec"] = r.timings_sec;
  return j.dump(2) + "\n";
}

std::string FormatMetrics(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "frames: " << r.num_frames << "  localized: " << r.num_localized
     << "  unlocalized: " << r.num_unlocalized << '\n';
  os << "translation  median " << r.median_translation << "  mean " << r.mean_translation
     << " +- " << r.std_translation << '\n';
  os << "rotation     median " << r.median_rotation_deg << " deg  mean " << r.mean_rotation_deg
     << " +- " << r.std_rotation_deg << " deg\n";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    os << "(" << r.thresholds[i].translation << ", " << r.thresholds[i].rotation_deg
       << " deg): " << std::setprecision(4) << r.accuracy[i] << "% of all frames, "
       << r.accuracy_localized[i] << "% of localized\n"
       << std::setprecision(6);
  }
  for (const auto& [stage, sec] : r.timings_sec) {
    os << "time " << stage << ": " << sec << " s\n";
  }
  return os.str();
}

}  // namespace anchorloc
