#include "anchorloc/feature_file.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "anchorloc/errors.h"

namespace anchorloc {
namespace {

constexpr char kMagic[4] = {'A', 'F', 'E', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 4 * 4;

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutF32(std::vector<std::uint8_t>& out, float v) {
  PutU32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t U32(const char* what) {
    if (bytes_.size() - pos_ < 4 || pos_ > bytes_.size()) {
      throw FormatError(std::string("truncated feature file reading ") + what,
                        pos_);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float F32(const char* what) { return std::bit_cast<float>(U32(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> EncodeFeatures(const FrameFeatures& features) {
  const auto& kps = features.keypoints;
  if (static_cast<std::size_t>(kps.descriptors.rows()) != kps.keypoints.size()) {
    throw InvalidArgument("descriptor rows do not match keypoint count");
  }
  const auto k = static_cast<std::uint32_t>(kps.keypoints.size());
  const auto d = static_cast<std::uint32_t>(kps.descriptors.cols());
  const auto g = static_cast<std::uint32_t>(features.global.values.size());
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 4 * (3 * k + k * d + g));
  out.insert(out.end(), kMagic, kMagic + 4);
  PutU32(out, kVersion);
  PutU32(out, k);
  PutU32(out, d);
  PutU32(out, g);
  for (const auto& kp : kps.keypoints) {
    PutF32(out, static_cast<float>(kp.position.x()));
    PutF32(out, static_cast<float>(kp.position.y()));
    PutF32(out, static_cast<float>(kp.score));
  }
  for (std::uint32_t i = 0; i < k; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) PutF32(out, kps.descriptors(i, j));
  }
  for (std::uint32_t i = 0; i < g; ++i) PutF32(out, features.global.values(i));
  return out;
}

FrameFeatures DecodeFeatures(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic, expected AFEA", 0);
  }
  Reader reader(bytes.subspan(4));
  auto offset = [&] { return 4 + reader.pos(); };
  const std::uint32_t version = reader.U32("version");
  if (version != kVersion) {
    throw FormatError("unsupported feature file version " +
                          std::to_string(version),
                      4);
  }
  const std::uint32_t k = reader.U32("keypoint count");
  const std::uint32_t d = reader.U32("descriptor width");
  const std::uint32_t g = reader.U32("global width");
  if (k > 0 && d == 0) {
    throw DimensionMismatch("keypoints present but descriptor width is zero");
  }
  const std::uint64_t expected =
      4ull * (3ull * k + static_cast<std::uint64_t>(k) * d + g);
  if (reader.remaining() < expected) {
    // Walk to the exact failing offset for the error message.
    const std::uint64_t whole = reader.remaining() / 4 * 4;
    throw FormatError("truncated feature file payload", offset() + whole);
  }
  if (reader.remaining() > expected) {
    throw FormatError("trailing bytes after feature payload",
                      offset() + expected);
  }
  FrameFeatures out;
  out.keypoints.keypoints.resize(k);
  for (auto& kp : out.keypoints.keypoints) {
    const float x = reader.F32("keypoint");
    const float y = reader.F32("keypoint");
    const float s = reader.F32("keypoint");
    kp.position = Pixel(x, y);
    kp.score = s;
  }
  out.keypoints.descriptors.resize(k, d);
  for (std::uint32_t i = 0; i < k; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      out.keypoints.descriptors(i, j) = reader.F32("descriptor");
    }
  }
  out.global.values.resize(g);
  for (std::uint32_t i = 0; i < g; ++i) out.global.values(i) = reader.F32("global");
  return out;
}

void ExportFeatures(const std::filesystem::path& path,
                    const FrameFeatures& features) {
  const auto bytes = EncodeFeatures(features);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

FrameFeatures ImportFeatures(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeFeatures(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string FeatureFileName(FrameId id) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << id << ".afeat";
  return os.str();
}

std::map<FrameId, FrameFeatures> ImportFeatureDirectory(
    const std::filesystem::path& dir) {
  std::map<FrameId, FrameFeatures> frames;
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  int width = -1;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".afeat") continue;
    FrameId id = 0;
    try {
      id = std::stoll(entry.path().stem().string());
    } catch (const std::exception&) {
      throw FormatError("feature file name is not a frame id: " +
                            entry.path().string(),
                        0);
    }
    auto features = ImportFeatures(entry.path());
    if (!features.keypoints.empty()) {
      const int w = features.keypoints.descriptor_dim();
      if (width >= 0 && w != width) {
        throw DimensionMismatch("descriptor width " + std::to_string(w) +
                                " in " + entry.path().string() +
                                " differs from " + std::to_string(width));
      }
      width = w;
    }
    frames.emplace(id, std::move(features));
  }
  return frames;
}

}  // namespace anchorloc
