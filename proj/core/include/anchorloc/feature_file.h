#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "anchorloc/features.h"
#include "anchorloc/pose_io.h"

namespace anchorloc {

struct FrameFeatures {
  KeypointSet keypoints;
  GlobalDescriptor global;
};

// Binary little-endian feature file:
//   "AFEA" | u32 version=1 | u32 K | u32 D | u32 d
//   K x (f32 x, f32 y, f32 score) | K x D f32 descriptors | d f32 global
// Values are stored as f32; a set whose values are f32-representable
// round-trips bit-exactly.
std::vector<std::uint8_t> EncodeFeatures(const FrameFeatures& features);
// Throws FormatError (with byte offset) on malformed or truncated input and
// DimensionMismatch when keypoints carry no descriptor columns.
FrameFeatures DecodeFeatures(std::span<const std::uint8_t> bytes);

void ExportFeatures(const std::filesystem::path& path,
                    const FrameFeatures& features);
FrameFeatures ImportFeatures(const std::filesystem::path& path);

// `<frame_id>.afeat`, frame id zero padded to six digits.
std::string FeatureFileName(FrameId id);

// Loads every `<id>.afeat` under dir keyed by frame id. Throws
// DimensionMismatch when descriptor widths differ between files.
std::map<FrameId, FrameFeatures> ImportFeatureDirectory(
    const std::filesystem::path& dir);

}  // namespace anchorloc
