#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "anchorloc/geom.h"

namespace anchorloc {

using FrameId = std::int64_t;
using Trajectory = std::map<FrameId, Pose>;

// Pose text format: one line per frame, `frame_id qw qx qy qz tx ty tz`,
// whitespace separated, world-to-camera. Blank lines and lines starting with
// '#' are ignored. Values are written with 17 significant digits so a
// write/read cycle is lossless.
Trajectory ReadPoses(const std::filesystem::path& path);
void WritePoses(const std::filesystem::path& path, const Trajectory& poses);
std::string FormatPoseLine(FrameId id, const Pose& pose);
// Parses the 8 fields of a pose line. `line_number` is used for errors.
std::pair<FrameId, Pose> ParsePoseLine(const std::string& line,
                                       std::uint64_t line_number = 0);

// Intrinsics file: one line `fx fy cx cy width height`.
CameraIntrinsics ReadIntrinsics(const std::filesystem::path& path);
void WriteIntrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& k);

}  // namespace anchorloc
