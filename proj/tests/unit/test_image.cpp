#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "cssim/errors.hpp"
#include "cssim/image.hpp"

namespace cssim {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Image, FlattenIsRowMajor) {
  const Image img(2, 2, {0.1, 0.2, 0.3, 0.4});
  const SignalVector v = flatten(img);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v(0), 0.1);
  EXPECT_EQ(v(1), 0.2);
  EXPECT_EQ(v(2), 0.3);
  EXPECT_EQ(v(3), 0.4);

  const Image one(1, 1, {0.7});
  EXPECT_EQ(flatten(one)(0), 0.7);
}

TEST(Image, UnflattenInvertsFlatten) {
  SignalVector v(4);
  v << 1, 2, 3, 4;
  const Image img = unflatten(v, 2, 2);
  EXPECT_EQ(img(0, 0), 1);
  EXPECT_EQ(img(0, 1), 2);
  EXPECT_EQ(img(1, 0), 3);
  EXPECT_EQ(img(1, 1), 4);

  SignalVector half(1);
  half << 0.5;
  EXPECT_EQ(unflatten(half, 1, 1)(0, 0), 0.5);
}

TEST(Image, UnflattenRejectsLengthMismatch) {
  EXPECT_THROW(unflatten(SignalVector::Zero(5), 2, 3), DimensionError);
  EXPECT_THROW(Image(2, 3, std::vector<double>(5)), DimensionError);
}

TEST(Image, FlattenRoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> side(1, 64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Image img(side(rng), side(rng));
    for (double& x : img.data()) x = u(rng);
    EXPECT_EQ(unflatten(flatten(img), img.height(), img.width()), img);
  }
}

TEST(Image, Rotate90IsCounterclockwise) {
  const Image img(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(rotate90(img), Image(2, 2, {2, 4, 1, 3}));

  // Non-square: 2x3 -> 3x2, top-right corner moves to top-left.
  const Image wide(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(rotate90(wide), Image(3, 2, {3, 6, 2, 5, 1, 4}));
}

TEST(Image, Rotate90FourTimesIsIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> side(1, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Image img(side(rng), side(rng));
    for (double& x : img.data()) x = u(rng);
    EXPECT_EQ(rotate90(rotate90(rotate90(rotate90(img)))), img);
  }
  const Image flat(5, 5, 0.3);
  EXPECT_EQ(rotate90(flat), flat);
}

TEST(Image, SavePgmBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "cssim_pgm_test";
  std::filesystem::create_directories(dir);

  save_pgm(Image(1, 1, {1.0}), dir / "one.pgm");
  const auto one = read_bytes(dir / "one.pgm");
  const std::string header = "P5\n1 1\n255\n";
  ASSERT_EQ(one.size(), header.size() + 1);
  EXPECT_EQ(std::string(one.begin(), one.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(one.back(), 255);

  save_pgm(Image(1, 3, {0.5, 0.0, 1.7}), dir / "three.pgm");
  const auto three = read_bytes(dir / "three.pgm");
  const std::string header3 = "P5\n3 1\n255\n";
  ASSERT_EQ(three.size(), header3.size() + 3);
  EXPECT_EQ(three[header3.size()], 128);
  EXPECT_EQ(three[header3.size() + 1], 0);
  EXPECT_EQ(three[header3.size() + 2], 255);  // clamped

  const Image big(7, 5, 0.25);
  save_pgm(big, dir / "big.pgm");
  EXPECT_EQ(std::filesystem::file_size(dir / "big.pgm"), std::string("P5\n5 7\n255\n").size() + 35);
}

TEST(Image, SavePgmReportsIoFailure) {
  EXPECT_THROW(save_pgm(Image(1, 1, 0.0), "/nonexistent-dir/x.pgm"), FileError);
}

}  // namespace
}  // namespace cssim
