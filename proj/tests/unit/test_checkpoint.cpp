#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "cssim/checkpoint.hpp"
#include "cssim/errors.hpp"
#include "fixtures.hpp"

namespace cssim {
namespace {

Checkpoint sample(bool with_adam) {
  ArchitectureSpec spec;
  spec.signal_length = 16;
  spec.rate = 0.25;
  spec.width_factor = 2;
  spec.depth = 2;
  Checkpoint c;
  c.arch = spec;
  c.params = init_params(spec, 11);
  for (auto& l : c.params.layers)
    if (l.bias) l.bias->setRandom();
  c.epoch = 17;
  c.early_stop.best = 0.123456789012345678;
  c.early_stop.epochs_since_improvement = 4;
  c.early_stop.patience = 9;
  c.config = {{"loss", "ssim"}, {"seed", "3"}};
  if (with_adam) {
    AdamState a;
    a.step = 42;
    a.hyper.learning_rate = 1e-3;
    for (const auto& t : c.params.tensors()) {
      a.m.emplace_back(t.size(), 1.0 / 3.0);
      a.v.emplace_back(t.size(), 2.0 / 7.0);
    }
    c.adam = a;
  }
  return c;
}

std::string serialize(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(c, out);
  return out.str();
}

Checkpoint parse(const std::string& text) {
  std::istringstream in(text);
  return read_checkpoint(in);
}

TEST(RealFormat, ShortestRoundTrip) {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(parse_real(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(parse_real(format_real(std::numeric_limits<double>::infinity())),
            std::numeric_limits<double>::infinity());
  EXPECT_THROW(parse_real("1.0x"), FormatError);
  EXPECT_THROW(parse_real(""), FormatError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const Checkpoint c = sample(true);
  const std::string text = serialize(c);
  const Checkpoint r = parse(text);
  ASSERT_EQ(r.params.layers.size(), c.params.layers.size());
  for (std::size_t l = 0; l < c.params.layers.size(); ++l) {
    EXPECT_EQ(r.params.layers[l].weight, c.params.layers[l].weight);
    EXPECT_EQ(r.params.layers[l].bias.has_value(), c.params.layers[l].bias.has_value());
    if (c.params.layers[l].bias) EXPECT_EQ(*r.params.layers[l].bias, *c.params.layers[l].bias);
    EXPECT_EQ(r.params.layers[l].activation, c.params.layers[l].activation);
  }
  EXPECT_EQ(r.epoch, 17u);
  EXPECT_EQ(r.early_stop.best, c.early_stop.best);
  EXPECT_EQ(r.early_stop.epochs_since_improvement, 4u);
  EXPECT_EQ(r.early_stop.patience, 9u);
  EXPECT_EQ(r.config, c.config);
  EXPECT_EQ(r.arch.depth, 2u);
  EXPECT_EQ(r.arch.rate, 0.25);
  ASSERT_TRUE(r.adam.has_value());
  EXPECT_EQ(r.adam->step, 42u);
  EXPECT_EQ(r.adam->hyper.learning_rate, 1e-3);
  EXPECT_EQ(r.adam->m, c.adam->m);
  EXPECT_EQ(r.adam->v, c.adam->v);
  EXPECT_EQ(serialize(r), text);

  const SignalVector x = SignalVector::Random(16);
  EXPECT_EQ(forward(r.params, x).first, forward(c.params, x).first);
}

TEST(Checkpoint, WithoutOptimizerState) {
  const Checkpoint r = parse(serialize(sample(false)));
  EXPECT_FALSE(r.adam.has_value());
}

TEST(Checkpoint, TruncationDetected) {
  const std::string text = serialize(sample(true));
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 3, text.size() / 2,
                          text.size() - 5}) {
    EXPECT_THROW(parse(text.substr(0, cut)), FormatError) << "cut at " << cut;
  }
}

TEST(Checkpoint, WrongVersionRejected) {
  std::string text = serialize(sample(false));
  const auto pos = text.find("version = 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "version = 2");
  EXPECT_THROW(parse(text), FormatError);
  EXPECT_THROW(parse("NOT-A-CHECKPOINT\n"), FormatError);
}

TEST(Checkpoint, FileRoundTripAndMissingFile) {
  const auto dir = testing_fixtures::temp_dir("ckpt");
  const Checkpoint c = sample(true);
  save_checkpoint(c, dir / "c.txt");
  EXPECT_EQ(serialize(load_checkpoint(dir / "c.txt")), serialize(c));
  EXPECT_THROW(load_checkpoint(dir / "absent.txt"), FileError);
}

TEST(SensingFile, RoundTrip) {
  const auto dir = testing_fixtures::temp_dir("phi");
  const Eigen::MatrixXd phi = extract_sensing_matrix(sample(false).params);
  save_sensing_matrix(phi, dir / "phi.txt");
  EXPECT_EQ(load_sensing_matrix(dir / "phi.txt"), phi);
  std::ofstream(dir / "bad.txt") << "CSSIM-TENSORS\nversion = 1\ntensor phi 2 2\n1 2\n";
  EXPECT_THROW(load_sensing_matrix(dir / "bad.txt"), FormatError);
}

}  // namespace
}  // namespace cssim
