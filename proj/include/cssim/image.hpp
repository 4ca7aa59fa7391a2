#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace cssim {

/// Flat signal x in R^N consumed by the network.
using SignalVector = Eigen::VectorXd;

/// Grayscale raster, row-major, intensities in [0,1] once normalized.
/// Gradient buffers reuse this type and may hold any real value.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

SignalVector flatten(const Image& img);

/// Throws DimensionError when v.size() != h * w.
Image unflatten(const SignalVector& v, std::size_t h, std::size_t w);

/// Counterclockwise quarter turn: out(r, c) = in(c, W - 1 - r).
Image rotate90(const Image& img);

/// Binary P5 PGM, maxval 255, byte = clamp(round(v * 255), 0, 255).
void save_pgm(const Image& img, const std::filesystem::path& path);

}  // namespace cssim
