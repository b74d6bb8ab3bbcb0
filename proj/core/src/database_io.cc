#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "anchorloc/errors.h"
#include "anchorloc/mapdb.h"
#include "json.hpp"

namespace anchorloc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kLandmarkMagic[4] = {'A', 'L', 'M', 'K'};
constexpr std::uint32_t kLandmarkVersion = 1;
constexpr int kManifestVersion = 1;

template <typename T>
void PutLE(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

class LEReader {
 public:
  explicit LEReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T Get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (bytes_.size() - pos_ < sizeof(U)) {
      throw FormatError(std::string("truncated landmark file reading ") + what, pos_);
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void WriteLandmarks(const fs::path& path, const LandmarkTable& table) {
  std::vector<std::uint8_t> out(kLandmarkMagic, kLandmarkMagic + 4);
  PutLE<std::uint32_t>(out, kLandmarkVersion);
  PutLE<std::uint64_t>(out, table.size());
  for (const auto& [id, lm] : table) {
    PutLE<std::int64_t>(out, id);
    for (int i = 0; i < 3; ++i) PutLE<double>(out, lm.position(i));
    PutLE<double>(out, lm.mean_reprojection_error);
    PutLE<std::uint32_t>(out, static_cast<std::uint32_t>(lm.observations.size()));
    for (const auto& o : lm.observations) {
      PutLE<std::int64_t>(out, o.frame_id);
      PutLE<std::uint32_t>(out, static_cast<std::uint32_t>(o.keypoint));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

LandmarkTable ReadLandmarks(const fs::path& path) {
  const auto bytes = ReadAll(path);
  if (bytes.size() < 4 || !std::equal(kLandmarkMagic, kLandmarkMagic + 4, bytes.begin())) {
    throw FormatError("bad landmark file magic", 0);
  }
  LEReader r(bytes);
  r.Get<std::uint32_t>("magic");
  if (r.Get<std::uint32_t>("version") != kLandmarkVersion) {
    throw FormatError("unsupported landmark file version", 4);
  }
  const auto count = r.Get<std::uint64_t>("count");
  LandmarkTable table;
  for (std::uint64_t i = 0; i < count; ++i) {
    Landmark lm;
    lm.id = r.Get<std::int64_t>("id");
    for (int c = 0; c < 3; ++c) lm.position(c) = r.Get<double>("position");
    lm.mean_reprojection_error = r.Get<double>("error");
    const auto n = r.Get<std::uint32_t>("observation count");
    lm.observations.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j) {
      KeypointRef ref;
      ref.frame_id = r.Get<std::int64_t>("observation frame");
      ref.keypoint = static_cast<int>(r.Get<std::uint32_t>("observation keypoint"));
      lm.observations.push_back(ref);
    }
    const auto at = r.pos();
    if (!table.emplace(lm.id, std::move(lm)).second) {
      throw FormatError("duplicate landmark id", at);
    }
  }
  if (!r.done()) throw FormatError("trailing bytes in landmark file", r.pos());
  return table;
}

void SaveDatabase(const fs::path& dir, const SceneDatabase& db) {
  fs::create_directories(dir / "features");
  std::ostringstream tsv;
  tsv << "# frame_id\timage\tqw qx qy qz tx ty tz\n";
  for (const auto& f : db.frames()) {
    const std::string pose_line = FormatPoseLine(f.frame_id, f.pose);
    tsv << f.frame_id << '\t' << (f.image_ref.empty() ? "-" : f.image_ref) << '\t'
        << pose_line.substr(pose_line.find(' ') + 1) << '\n';
    ExportFeatures(dir / "features" / FeatureFileName(f.frame_id),
                   FrameFeatures{f.keypoints, f.global});
  }
  WriteText(dir / "frames.tsv", tsv.str());
  WriteLandmarks(dir / "landmarks.bin", db.landmarks());

  const auto& k = db.intrinsics();
  const auto& opt = db.options();
  json manifest = {
      {"format", "anchorloc-database"},
      {"version", kManifestVersion},
      {"num_frames", db.frames().size()},
      {"num_landmarks", db.landmarks().size()},
      {"descriptor_dim", db.frames().empty() ? 0 : db.frames()[0].keypoints.descriptor_dim()},
      {"global_dim", db.frames().empty() ? 0 : db.frames()[0].global.dim()},
      {"adjacency", opt.adjacency},
      {"ratio", opt.ratio},
      {"max_reprojection_error", opt.gates.max_reprojection_error},
      {"min_triangulation_angle_deg", opt.gates.min_angle_deg},
      {"intrinsics",
       {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
        {"width", k.width}, {"height", k.height}}},
  };
  WriteText(dir / "manifest.json", manifest.dump(2) + "\n");
}

SceneDatabase LoadDatabase(const fs::path& dir) {
  json manifest;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(std::string("manifest.json: ") + e.what(), 0);
    }
  }
  CameraIntrinsics k;
  MapBuildOptions opt;
  try {
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported database version", 0);
    }
    const auto& ki = manifest.at("intrinsics");
    k.fx = ki.at("fx").get<double>();
    k.fy = ki.at("fy").get<double>();
    k.cx = ki.at("cx").get<double>();
    k.cy = ki.at("cy").get<double>();
    k.width = ki.at("width").get<int>();
    k.height = ki.at("height").get<int>();
    opt.adjacency = manifest.at("adjacency").get<int>();
    opt.ratio = manifest.at("ratio").get<double>();
    opt.gates.max_reprojection_error = manifest.at("max_reprojection_error").get<double>();
    opt.gates.min_angle_deg = manifest.at("min_triangulation_angle_deg").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what(), 0);
  }

  std::ifstream tsv(dir / "frames.tsv");
  if (!tsv) throw IoError("cannot open " + (dir / "frames.tsv").string());
  std::vector<MapFrame> frames;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(tsv, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError("frames.tsv: expected 3 columns", line_no);
    MapFrame f;
    const std::string id_text = line.substr(0, t1);
    f.image_ref = line.substr(t1 + 1, t2 - t1 - 1);
    if (f.image_ref == "-") f.image_ref.clear();
    auto [id, pose] = ParsePoseLine(id_text + " " + line.substr(t2 + 1), line_no);
    f.frame_id = id;
    f.pose = pose;
    FrameFeatures feats = ImportFeatures(dir / "features" / FeatureFileName(id));
    f.keypoints = std::move(feats.keypoints);
    f.global = std::move(feats.global);
    f.point_ids.assign(f.keypoints.size(), std::nullopt);
    frames.push_back(std::move(f));
  }
  LandmarkTable landmarks = ReadLandmarks(dir / "landmarks.bin");
  std::unordered_map<FrameId, std::size_t> index;
  for (std::size_t i = 0; i < frames.size(); ++i) index.emplace(frames[i].frame_id, i);
  for (const auto& [id, lm] : landmarks) {
    for (const auto& o : lm.observations) {
      auto it = index.find(o.frame_id);
      if (it == index.end() || o.keypoint < 0 ||
          o.keypoint >= static_cast<int>(frames[it->second].point_ids.size())) {
        throw ValidationError("landmark " + std::to_string(id) +
                              " references a missing frame or keypoint");
      }
      auto& slot = frames[it->second].point_ids[o.keypoint];
      if (slot) {
        throw ValidationError("keypoint shared by landmarks " + std::to_string(*slot) +
                              " and " + std::to_string(id));
      }
      slot = id;
    }
  }
  return SceneDatabase(k, std::move(frames), std::move(landmarks), opt);
}

}  // namespace anchorloc
