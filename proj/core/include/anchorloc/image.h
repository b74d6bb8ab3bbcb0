#pragma once

#include <filesystem>
#include <vector>

namespace anchorloc {

// Single-channel floating point raster, row-major, intensities nominally in
// [0, 255].
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  float& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  float at(int x, int y) const {
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  // Border-replicating access.
  float AtClamped(int x, int y) const;
  // Bilinear interpolation with border replication.
  float Sample(double x, double y) const;

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Normalized, sampled 1D Gaussian kernel with radius ceil(3 * sigma).
std::vector<double> GaussianKernel(double sigma);

// Separable Gaussian blur with border replication. sigma <= 0 returns a copy.
Image GaussianBlur(const Image& image, double sigma);

// Binary 8-bit PGM (P5). Reading also accepts ASCII P2. Values are rounded and
// clamped to [0, 255] on write.
Image ReadPgm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const Image& image);

}  // namespace anchorloc
