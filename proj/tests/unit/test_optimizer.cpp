#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cssim/errors.hpp"
#include "cssim/optimizer.hpp"

namespace cssim {
namespace {

// Scalar Adam written out directly for comparison.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr = 5e-4) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    return theta - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

void step(AdamState& s, std::vector<double>& theta, const std::vector<double>& g) {
  std::vector<std::span<double>> p{theta};
  std::vector<std::span<const double>> gr{g};
  adam_step(s, p, gr);
}

TEST(Adam, Defaults) {
  const AdamHyper h;
  EXPECT_EQ(h.learning_rate, 5e-4);
  EXPECT_EQ(h.beta1, 0.9);
  EXPECT_EQ(h.beta2, 0.999);
  EXPECT_EQ(h.epsilon, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState s;
  std::vector<double> theta{0.3, -1.2, 7.0};
  const auto before = theta;
  for (int i = 0; i < 5; ++i) step(s, theta, {0.0, 0.0, 0.0});
  EXPECT_EQ(theta, before);
  EXPECT_EQ(s.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState s;
  std::vector<double> theta{1.0};
  step(s, theta, {0.2});
  const double delta = theta[0] - 1.0;
  EXPECT_NEAR(delta, -0.0004999999750000013, 1e-15);
  EXPECT_NEAR(delta, -5e-4, 1e-10);
}

TEST(Adam, QuadraticTwoStepTrace) {
  AdamState s;
  std::vector<double> theta{1.0};
  step(s, theta, {2.0 * theta[0]});
  EXPECT_NEAR(theta[0], 0.9995000000025, 1e-12);
  step(s, theta, {2.0 * theta[0]});
  EXPECT_NEAR(theta[0], 0.9990000065386797, 1e-12);
}

TEST(Adam, MatchesScalarReferenceOverManySteps) {
  AdamState s;
  std::vector<double> theta{0.7, -0.4};
  ScalarAdam a, b;
  double ta = 0.7, tb = -0.4;
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> g{std::sin(theta[0] * 3.0), theta[1] - 2.0};
    ta = a.step(ta, std::sin(ta * 3.0));
    tb = b.step(tb, tb - 2.0);
    step(s, theta, g);
    ASSERT_NEAR(theta[0], ta, 1e-14);
    ASSERT_NEAR(theta[1], tb, 1e-14);
  }
}

TEST(Adam, ShapeMismatch) {
  AdamState s;
  std::vector<double> theta{1.0, 2.0};
  EXPECT_THROW(step(s, theta, {1.0}), DimensionError);
  std::vector<std::span<double>> p{theta};
  std::vector<std::span<const double>> none;
  EXPECT_THROW(adam_step(s, p, none), DimensionError);
}

TEST(EarlyStop, ConstantSequenceStopsAfterPatience) {
  EarlyStop es;
  EXPECT_EQ(es.patience, 50u);
  int observations = 0;
  StopDecision d = StopDecision::Continue;
  while (d == StopDecision::Continue && observations < 1000) {
    d = observe_epoch(es, 1.0);
    ++observations;
  }
  // First observation improves on +inf, then 51 non-improving epochs.
  EXPECT_EQ(observations, 52);
  EXPECT_EQ(es.best, 1.0);
}

TEST(EarlyStop, StrictImprovementResets) {
  EarlyStop es;
  es.patience = 3;
  EXPECT_EQ(observe_epoch(es, 5.0), StopDecision::Continue);
  EXPECT_EQ(observe_epoch(es, 5.0), StopDecision::Continue);
  EXPECT_EQ(es.epochs_since_improvement, 1u);
  EXPECT_EQ(observe_epoch(es, 4.0), StopDecision::Continue);
  EXPECT_EQ(es.epochs_since_improvement, 0u);
  EXPECT_EQ(observe_epoch(es, 4.0), StopDecision::Continue);
  EXPECT_EQ(observe_epoch(es, 4.5), StopDecision::Continue);
  EXPECT_EQ(observe_epoch(es, 4.0), StopDecision::Continue);
  EXPECT_EQ(observe_epoch(es, 4.0), StopDecision::Stop);
}

TEST(EarlyStop, NonFiniteRejected) {
  EarlyStop es;
  EXPECT_THROW(observe_epoch(es, std::numeric_limits<double>::quiet_NaN()), NumericError);
  EXPECT_THROW(observe_epoch(es, std::numeric_limits<double>::infinity()), NumericError);
}

}  // namespace
}  // namespace cssim
