#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cssim/image.hpp"

namespace cssim {

enum class Split { Train, Test };

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarPlane;

/// Reads data_batch_1..5.bin (train) or test_batch.bin (test) from dir.
/// Only the first (red) plane of each record is kept, scaled by 1/255.
/// `limit` truncates to the first `limit` records in file order.
std::vector<Image> load_cifar10(const std::filesystem::path& dir, Split split,
                                std::optional<std::size_t> limit = std::nullopt);

/// Decodes a buffer of whole records. Throws FormatError when the size is
/// not a multiple of kCifarRecordBytes.
std::vector<Image> decode_cifar10_records(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source = "<buffer>");

/// Originals, then every image rotated 90, then 180, then 270 degrees.
std::vector<Image> augment_rotations(const std::vector<Image>& images);

struct DatasetManifest {
  std::vector<Image> train;
  std::vector<Image> validation;
  std::vector<Image> test;
  std::string source;
};

/// Carves validation out of the raw training images with a seeded shuffle,
/// then augments only what remains. Test images are passed through as-is.
DatasetManifest make_manifest(const std::vector<Image>& train, std::vector<Image> test,
                              double validation_fraction, std::uint64_t seed,
                              std::string source = {});

}  // namespace cssim
