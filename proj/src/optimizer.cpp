#include "cssim/optimizer.hpp"

#include <cmath>
#include <string>

#include "cssim/errors.hpp"

namespace cssim {

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " tensors but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam: state tracks a different number of tensors");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size() ||
        state.v[k].size() != params[k].size()) {
      throw DimensionError("adam: tensor " + std::to_string(k) + " shape mismatch");
    }
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::span<double> theta = params[k];
    std::span<const double> g = grads[k];
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

StopDecision observe_epoch(EarlyStop& stop, double monitored) {
  if (!std::isfinite(monitored)) {
    throw NumericError("monitored loss is not finite");
  }
  if (monitored < stop.best) {
    stop.best = monitored;
    stop.epochs_since_improvement = 0;
    return StopDecision::Continue;
  }
  stop.epochs_since_improvement += 1;
  return stop.epochs_since_improvement > stop.patience ? StopDecision::Stop
                                                      : StopDecision::Continue;
}

}  // namespace cssim
