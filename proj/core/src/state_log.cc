#include <fstream>

#include "anchorloc/errors.h"
#include "anchorloc/pipeline.h"
#include "json.hpp"

namespace anchorloc {
namespace {

using nlohmann::json;

json PoseJson(const Pose& p) {
  const auto& q = p.rotation();
  const auto& t = p.translation();
  return json::array({q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()});
}

Pose PoseFromJson(const json& j) {
  if (!j.is_array() || j.size() != 7) throw FormatError("pose must have 7 values", 0);
  const Eigen::Quaterniond q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                             j[3].get<double>());
  return Pose(q, Eigen::Vector3d(j[4].get<double>(), j[5].get<double>(), j[6].get<double>()));
}

MatchFailure ParseFailure(const std::string& s) {
  for (auto f : {MatchFailure::kNone, MatchFailure::kNoConsensus,
                 MatchFailure::kNoAnchorsInWindow, MatchFailure::kTooFewCorrespondences,
                 MatchFailure::kBelowInlierThreshold}) {
    if (ToString(f) == s) return f;
  }
  throw FormatError("unknown failure tag '" + s + "'", 0);
}

}  // namespace

void WriteLocalizeLog(const std::filesystem::path& path, const LocalizeSession& s,
                      const LocalizationResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& k = s.intrinsics;
  json session = {
      {"type", "session"},
      {"database", s.database.string()},
      {"queries", s.queries.string()},
      {"intrinsics",
       {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
        {"width", k.width}, {"height", k.height}}},
      {"temporal",
       {{"n_r", s.temporal.n_r},
        {"window", s.temporal.window},
        {"iterations", s.temporal.iterations},
        {"min_inliers", s.temporal.min_inliers},
        {"ratio", s.temporal.ratio},
        {"guided_frames", s.temporal.guided_frames}}},
      {"ransac",
       {{"threshold", s.ransac.inlier_threshold},
        {"max_iterations", s.ransac.max_iterations},
        {"confidence", s.ransac.confidence},
        {"seed", s.ransac.seed}}},
      {"max_keypoints", s.max_keypoints},
      {"temporal_enabled", s.temporal_enabled},
      {"rounds", result.rounds},
  };
  out << session.dump() << '\n';
  for (const auto& r : result.log) {
    json a = {{"type", "attempt"},
              {"frame_id", r.frame_id},
              {"stage", r.stage},
              {"round", r.round},
              {"num_correspondences", r.num_correspondences},
              {"num_inliers", r.num_inliers},
              {"anchored", r.anchored},
              {"failure", ToString(r.failure)},
              {"pose", r.pose ? PoseJson(*r.pose) : json(nullptr)},
              {"mean_inlier_error", r.mean_inlier_error}};
    out << a.dump() << '\n';
  }
  for (const auto& f : result.frames) {
    json kp_landmark = json::array();
    for (std::size_t i = 0; i < f.kp_landmark.size(); ++i) {
      if (f.kp_landmark[i]) kp_landmark.push_back({i, *f.kp_landmark[i]});
    }
    json links = json::array();
    for (const auto& l : f.global_links) links.push_back({l.keypoint, l.landmark, l.score});
    json frame = {{"type", "frame"},
                  {"frame_id", f.frame_id},
                  {"anchored", f.anchored()},
                  {"source", f.source == AnchorSource::kGlobal ? "global" : "temporal"},
                  {"round", f.round},
                  {"kp_landmark", kp_landmark},
                  {"global_links", links},
                  {"candidate", f.candidate ? PoseJson(*f.candidate) : json(nullptr)},
                  {"candidate_inliers", f.candidate_inliers}};
    if (f.anchor) {
      frame["pose"] = PoseJson(f.anchor->pose);
      frame["num_inliers"] = f.anchor->num_inliers;
      frame["mean_inlier_error"] = f.anchor->mean_inlier_error;
      frame["inlier_mask"] = f.anchor->inlier_mask;
    }
    out << frame.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LocalizeState ReadLocalizeLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LocalizeState state;
  bool have_session = false;
  std::map<FrameId, QueryFrame> frames;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "session") {
        auto& s = state.session;
        s.database = j.at("database").get<std::string>();
        s.queries = j.at("queries").get<std::string>();
        const auto& k = j.at("intrinsics");
        s.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                        k.at("cx").get<double>(), k.at("cy").get<double>(),
                        k.at("width").get<int>(), k.at("height").get<int>()};
        const auto& t = j.at("temporal");
        s.temporal.n_r = t.at("n_r").get<int>();
        s.temporal.window = t.at("window").get<int>();
        s.temporal.iterations = t.at("iterations").get<int>();
        s.temporal.min_inliers = t.at("min_inliers").get<int>();
        s.temporal.ratio = t.at("ratio").get<double>();
        s.temporal.guided_frames = t.at("guided_frames").get<int>();
        const auto& r = j.at("ransac");
        s.ransac.inlier_threshold = r.at("threshold").get<double>();
        s.ransac.max_iterations = r.at("max_iterations").get<int>();
        s.ransac.confidence = r.at("confidence").get<double>();
        s.ransac.seed = r.at("seed").get<std::uint64_t>();
        s.max_keypoints = j.at("max_keypoints").get<int>();
        s.temporal_enabled = j.at("temporal_enabled").get<bool>();
        have_session = true;
      } else if (type == "attempt") {
        AttemptRecord r;
        r.frame_id = j.at("frame_id").get<FrameId>();
        r.stage = j.at("stage").get<std::string>();
        r.round = j.at("round").get<int>();
        r.num_correspondences = j.at("num_correspondences").get<int>();
        r.num_inliers = j.at("num_inliers").get<int>();
        r.anchored = j.at("anchored").get<bool>();
        r.failure = ParseFailure(j.at("failure").get<std::string>());
        if (!j.at("pose").is_null()) r.pose = PoseFromJson(j.at("pose"));
        r.mean_inlier_error = j.at("mean_inlier_error").get<double>();
        state.log.push_back(r);
      } else if (type == "frame") {
        QueryFrame f;
        f.frame_id = j.at("frame_id").get<FrameId>();
        f.source = j.at("source").get<std::string>() == "global" ? AnchorSource::kGlobal
                                                                 : AnchorSource::kTemporal;
        f.round = j.at("round").get<int>();
        if (j.at("anchored").get<bool>()) {
          PoseEstimate e;
          e.pose = PoseFromJson(j.at("pose"));
          e.num_inliers = j.at("num_inliers").get<int>();
          e.mean_inlier_error = j.at("mean_inlier_error").get<double>();
          e.inlier_mask = j.at("inlier_mask").get<std::vector<std::uint8_t>>();
          f.anchor = e;
        }
        for (const auto& p : j.at("kp_landmark")) {
          const auto kp = p.at(0).get<std::size_t>();
          if (f.kp_landmark.size() <= kp) f.kp_landmark.resize(kp + 1);
          f.kp_landmark[kp] = p.at(1).get<LandmarkId>();
        }
        for (const auto& l : j.at("global_links")) {
          f.global_links.push_back(
              {l.at(0).get<int>(), l.at(1).get<LandmarkId>(), l.at(2).get<double>()});
        }
        if (!j.at("candidate").is_null()) f.candidate = PoseFromJson(j.at("candidate"));
        f.candidate_inliers = j.at("candidate_inliers").get<int>();
        frames[f.frame_id] = std::move(f);
      } else {
        throw FormatError("unknown record type '" + type + "'", line_no);
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("localize log: ") + e.what(), line_no);
    }
  }
  if (!have_session) throw FormatError("localize log has no session record", 0);

  auto features = LoadFrames(state.session.queries, state.session.max_keypoints);
  for (auto& [id, f] : frames) {
    auto it = features.find(id);
    if (it == features.end()) {
      throw ValidationError("frame " + std::to_string(id) + " missing from " +
                            state.session.queries.string());
    }
    f.keypoints = std::move(it->second.keypoints);
    f.global = std::move(it->second.global);
    if (f.kp_landmark.size() > f.keypoints.size()) {
      throw ValidationError("frame " + std::to_string(id) + ": keypoint index out of range");
    }
    f.kp_landmark.resize(f.keypoints.size());
    for (const auto& l : f.global_links) {
      if (l.keypoint < 0 || l.keypoint >= static_cast<int>(f.keypoints.size())) {
        throw ValidationError("frame " + std::to_string(id) + ": link out of range");
      }
    }
    state.frames.push_back(std::move(f));
  }
  return state;
}

}  // namespace anchorloc
