#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace cssim {

struct AdamHyper {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers mirror the parameter tensors one-to-one. Empty buffers are
/// sized (and zeroed) on the first step.
struct AdamState {
  AdamHyper hyper;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One synchronized Adam update of every tensor. Throws DimensionError when
/// the tensor list or any tensor length disagrees with grads or the state.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

enum class StopDecision { Continue, Stop };

/// Patience rule: stop once more than `patience` consecutive observations
/// fail to go strictly below the best value seen.
struct EarlyStop {
  double best = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::size_t patience = 50;
};

/// Throws NumericError on a non-finite value.
StopDecision observe_epoch(EarlyStop& stop, double monitored);

}  // namespace cssim
