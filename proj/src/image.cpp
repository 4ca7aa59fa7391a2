#include "cssim/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "cssim/errors.hpp"

namespace cssim {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height_ * width_) {
    throw DimensionError("image data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(height_) + "x" +
                         std::to_string(width_));
  }
}

SignalVector flatten(const Image& img) {
  return Eigen::Map<const SignalVector>(img.data().data(),
                                        static_cast<Eigen::Index>(img.size()));
}

Image unflatten(const SignalVector& v, std::size_t h, std::size_t w) {
  if (static_cast<std::size_t>(v.size()) != h * w) {
    throw DimensionError("cannot unflatten length " + std::to_string(v.size()) +
                         " into " + std::to_string(h) + "x" + std::to_string(w));
  }
  return Image(h, w, std::vector<double>(v.data(), v.data() + v.size()));
}

Image rotate90(const Image& img) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  Image out(w, h);
  for (std::size_t r = 0; r < w; ++r) {
    for (std::size_t c = 0; c < h; ++c) {
      out(r, c) = img(c, w - 1 - r);
    }
  }
  return out;
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), [](double v) {
    const double scaled = std::clamp(std::round(v * 255.0), 0.0, 255.0);
    return static_cast<char>(static_cast<unsigned char>(scaled));
  });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FileError("failed writing " + path.string());
  }
}

}  // namespace cssim
