#include "cssim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "cssim/errors.hpp"

namespace cssim {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cannot open CIFAR-10 batch " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::filesystem::path> batch_files(const std::filesystem::path& dir,
                                               Split split) {
  if (split == Split::Test) {
    return {dir / "test_batch.bin"};
  }
  std::vector<std::filesystem::path> files;
  for (int i = 1; i <= 5; ++i) {
    files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  }
  return files;
}

}  // namespace

std::vector<Image> decode_cifar10_records(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(source + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  std::vector<Image> images;
  images.reserve(n);
  for (std::size_t rec = 0; rec < n; ++rec) {
    // Skip the label byte; the red plane follows immediately.
    const std::uint8_t* red = bytes.data() + rec * kCifarRecordBytes + 1;
    std::vector<double> px(kCifarPlane);
    std::transform(red, red + kCifarPlane, px.begin(),
                   [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
    images.emplace_back(kCifarSide, kCifarSide, std::move(px));
  }
  return images;
}

std::vector<Image> load_cifar10(const std::filesystem::path& dir, Split split,
                                std::optional<std::size_t> limit) {
  const auto files = batch_files(dir, split);
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) {
      throw FileError("missing CIFAR-10 batch file " + f.string());
    }
  }
  std::vector<Image> images;
  for (const auto& f : files) {
    if (limit && images.size() >= *limit) {
      break;
    }
    auto batch = decode_cifar10_records(read_file(f), f.string());
    std::move(batch.begin(), batch.end(), std::back_inserter(images));
  }
  if (limit && images.size() > *limit) {
    images.resize(*limit);
  }
  return images;
}

std::vector<Image> augment_rotations(const std::vector<Image>& images) {
  std::vector<Image> out;
  out.reserve(images.size() * 4);
  out.insert(out.end(), images.begin(), images.end());
  for (int quarter = 1; quarter <= 3; ++quarter) {
    const std::size_t prev_begin = out.size() - images.size();
    for (std::size_t i = 0; i < images.size(); ++i) {
      out.push_back(rotate90(out[prev_begin + i]));
    }
  }
  return out;
}

DatasetManifest make_manifest(const std::vector<Image>& train, std::vector<Image> test,
                              double validation_fraction, std::uint64_t seed,
                              std::string source) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1), got " +
                      std::to_string(validation_fraction));
  }
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(train.size())));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  DatasetManifest m;
  m.validation.reserve(val_idx.size());
  for (auto i : val_idx) {
    m.validation.push_back(train[i]);
  }
  std::vector<Image> kept;
  kept.reserve(train_idx.size());
  for (auto i : train_idx) {
    kept.push_back(train[i]);
  }
  m.train = kept.empty() ? std::vector<Image>{} : augment_rotations(kept);
  m.test = std::move(test);
  m.source = std::move(source);
  return m;
}

}  // namespace cssim
