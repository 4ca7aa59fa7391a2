#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cssim/image.hpp"

namespace cssim {

enum class Activation { Linear, Sigmoid };

/// Layer sizes: N -> M = round(N R) (sensing, no bias, linear)
///   -> K hidden layers of N B (sigmoid) -> N (output activation).
struct ArchitectureSpec {
  std::size_t signal_length = 1024;
  double rate = 0.125;
  std::size_t width_factor = 2;
  std::size_t depth = 1;
  Activation output_activation = Activation::Sigmoid;

  std::size_t measurements() const;
  std::size_t hidden_width() const { return signal_length * width_factor; }

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

struct Layer {
  Eigen::MatrixXd weight;               // out x in
  std::optional<Eigen::VectorXd> bias;  // absent for the sensing layer
  Activation activation = Activation::Linear;

  std::size_t inputs() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t outputs() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Ordered layers; layer 0 holds the sensing matrix.
struct NetworkParams {
  std::vector<Layer> layers;

  std::size_t input_size() const;
  std::size_t output_size() const;

  /// Checks that consecutive layers chain and biases match their layer.
  void validate() const;

  /// Flat views of every tensor: weight then bias, layer by layer.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  /// Zero-valued parameters with identical shapes.
  NetworkParams zeros_like() const;
};

/// Gradients share the parameter layout.
using NetworkGradients = NetworkParams;

/// Per-layer activations for a batch (one column per sample).
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

NetworkParams init_params(const ArchitectureSpec& spec, std::uint64_t seed);

double sigmoid(double t);

/// Columns of `x` are samples. Fills `cache` when non-null.
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x,
                              ForwardCache* cache = nullptr);

std::pair<SignalVector, ForwardCache> forward(const NetworkParams& params,
                                              const SignalVector& x);

/// Gradients of sum_j L_j, where column j of `grad_output` is dL_j/dy_hat_j.
/// Callers wanting a batch mean scale `grad_output` by 1/batch first.
NetworkGradients backward(const NetworkParams& params, const ForwardCache& cache,
                          const Eigen::MatrixXd& grad_output);

struct MseReport {
  double loss = 0.0;
  SignalVector gradient;  // d loss / d y_hat
};

/// loss = mean((y_hat - x)^2), gradient = 2 (y_hat - x) / N.
MseReport mse_loss_and_grad(const SignalVector& x, const SignalVector& y_hat);

/// Copy of the layer-0 weights (M x N).
Eigen::MatrixXd extract_sensing_matrix(const NetworkParams& params);

SignalVector apply_sensing(const Eigen::MatrixXd& phi, const SignalVector& x);

}  // namespace cssim
