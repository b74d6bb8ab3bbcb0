#include "anchorloc/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "anchorloc/errors.h"

namespace anchorloc {

Image::Image(int width, int height, float fill)
    : width_(width),
      height_(height),
      data_(static_cast<size_t>(std::max(0, width)) * std::max(0, height),
            fill) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image size");
}

float Image::AtClamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

float Image::Sample(double x, double y) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double top = (1.0 - ax) * AtClamped(x0, y0) + ax * AtClamped(x0 + 1, y0);
  const double bottom =
      (1.0 - ax) * AtClamped(x0, y0 + 1) + ax * AtClamped(x0 + 1, y0 + 1);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

std::vector<double> GaussianKernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& v : kernel) v /= sum;
  return kernel;
}

Image GaussianBlur(const Image& image, double sigma) {
  if (!(sigma > 0.0) || image.empty()) return image;
  const auto kernel = GaussianKernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = image.width();
  const int h = image.height();
  std::vector<double> tmp(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * image.AtClamped(x + i, y);
      }
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp[static_cast<size_t>(yy) * w + x];
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string NextToken(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      if (!token.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

}  // namespace

Image ReadPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  const std::string magic = NextToken(in);
  if (magic != "P5" && magic != "P2") {
    throw FormatError("not a PGM file: " + path.string(), 0);
  }
  int width = 0;
  int height = 0;
  int maxval = 0;
  try {
    width = std::stoi(NextToken(in));
    height = std::stoi(NextToken(in));
    maxval = std::stoi(NextToken(in));
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header: " + path.string(),
                      static_cast<std::uint64_t>(in.tellg()));
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw FormatError("invalid PGM dimensions: " + path.string(), 0);
  }
  Image image(width, height);
  const double scale = 255.0 / maxval;
  if (magic == "P2") {
    for (auto& v : image.data()) {
      int value = 0;
      if (!(in >> value)) {
        throw FormatError("truncated PGM data: " + path.string(),
                          static_cast<std::uint64_t>(in.tellg()));
      }
      v = static_cast<float>(value * scale);
    }
    return image;
  }
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(static_cast<size_t>(width) * height * bytes);
  const auto data_offset = static_cast<std::uint64_t>(in.tellg());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError("truncated PGM data: " + path.string(),
                      data_offset + static_cast<std::uint64_t>(in.gcount()));
  }
  for (size_t i = 0; i < image.data().size(); ++i) {
    const int value =
        bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    image.data()[i] = static_cast<float>(value * scale);
  }
  return image;
}

void WritePgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.data().size());
  for (size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::clamp(std::lround(image.data()[i]), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

}  // namespace anchorloc
