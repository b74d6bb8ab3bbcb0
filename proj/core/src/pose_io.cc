#include "anchorloc/pose_io.h"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "anchorloc/errors.h"

namespace anchorloc {
namespace {

bool IsSkippable(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

std::string FormatPoseLine(FrameId id, const Pose& pose) {
  std::ostringstream os;
  os << std::setprecision(17) << id;
  const auto& q = pose.rotation();
  const auto& t = pose.translation();
  os << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
     << t.x() << ' ' << t.y() << ' ' << t.z();
  return os.str();
}

std::pair<FrameId, Pose> ParsePoseLine(const std::string& line,
                                       std::uint64_t line_number) {
  std::istringstream is(line);
  FrameId id = 0;
  double qw, qx, qy, qz, tx, ty, tz;
  if (!(is >> id >> qw >> qx >> qy >> qz >> tx >> ty >> tz)) {
    throw FormatError("expected `frame_id qw qx qy qz tx ty tz`", line_number);
  }
  std::string extra;
  if (is >> extra) throw FormatError("trailing fields in pose line", line_number);
  const Eigen::Quaterniond q(qw, qx, qy, qz);
  if (!(q.norm() > 1e-12)) throw FormatError("zero quaternion", line_number);
  return {id, Pose(q, Eigen::Vector3d(tx, ty, tz))};
}

Trajectory ReadPoses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file " + path.string());
  Trajectory poses;
  std::string line;
  std::uint64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (IsSkippable(line)) continue;
    auto [id, pose] = ParsePoseLine(line, line_number);
    if (!poses.emplace(id, pose).second) {
      throw FormatError("duplicate frame id " + std::to_string(id),
                        line_number);
    }
  }
  return poses;
}

void WritePoses(const std::filesystem::path& path, const Trajectory& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pose file " + path.string());
  for (const auto& [id, pose] : poses) out << FormatPoseLine(id, pose) << '\n';
}

CameraIntrinsics ReadIntrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open intrinsics file " + path.string());
  std::string line;
  std::uint64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (IsSkippable(line)) continue;
    std::istringstream is(line);
    CameraIntrinsics k;
    if (!(is >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) {
      throw FormatError("expected `fx fy cx cy width height`", line_number);
    }
    k.Validate();
    return k;
  }
  throw FormatError("intrinsics file is empty", line_number);
}

void WriteIntrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write intrinsics file " + path.string());
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' '
      << k.cy << ' ' << k.width << ' ' << k.height << '\n';
}

}  // namespace anchorloc
