#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cssim/dataset.hpp"

namespace testing_fixtures {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cssim_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Smooth synthetic 32x32 red plane: a couple of random gradients and blobs.
inline std::vector<std::uint8_t> synthetic_plane(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double gx = u(rng) - 0.5, gy = u(rng) - 0.5, base = 0.3 + 0.4 * u(rng);
  const double cx = 32 * u(rng), cy = 32 * u(rng), amp = u(rng) - 0.5, rad = 4 + 8 * u(rng);
  std::vector<std::uint8_t> plane(cssim::kCifarPlane);
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
      double v = base + gx * (c / 32.0) + gy * (r / 32.0) + amp * std::exp(-d2 / (rad * rad));
      v = std::min(1.0, std::max(0.0, v));
      plane[r * 32 + c] = static_cast<std::uint8_t>(std::lround(v * 255));
    }
  }
  return plane;
}

/// Writes data_batch_1..5.bin with `per_batch` records each and
/// test_batch.bin with `test` records. Pixel (0,0) of record i holds i % 256
/// (global index across the train batches) unless `smooth` is set, in which
/// case planes are synthetic smooth images.
inline void write_cifar_dir(const std::filesystem::path& dir, std::size_t per_batch,
                            std::size_t test, bool smooth = false, std::uint64_t seed = 1) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::size_t global = 0;
  auto write = [&](const std::filesystem::path& file, std::size_t n) {
    std::ofstream out(file, std::ios::binary);
    for (std::size_t i = 0; i < n; ++i, ++global) {
      std::vector<std::uint8_t> rec(cssim::kCifarRecordBytes, 0);
      rec[0] = static_cast<std::uint8_t>(i % 10);
      if (smooth) {
        const auto plane = synthetic_plane(rng);
        std::copy(plane.begin(), plane.end(), rec.begin() + 1);
      } else {
        rec[1] = static_cast<std::uint8_t>(global % 256);
      }
      rec[1 + cssim::kCifarPlane] = 99;
      out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
  };
  for (int b = 1; b <= 5; ++b) {
    write(dir / ("data_batch_" + std::to_string(b) + ".bin"), per_batch);
  }
  global = 0;
  write(dir / "test_batch.bin", test);
}

}  // namespace testing_fixtures
