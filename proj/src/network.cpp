#include "cssim/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "cssim/errors.hpp"

namespace cssim {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::Linear) {
    return z;
  }
  return z.unaryExpr([](double t) { return sigmoid(t); });
}

}  // namespace

std::size_t ArchitectureSpec::measurements() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(signal_length) * rate));
}

void ArchitectureSpec::validate() const {
  if (signal_length < 2) {
    throw ConfigError("signal length must be at least 2");
  }
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ConfigError("sensing rate must satisfy 0 < R < 1, got " + std::to_string(rate));
  }
  const std::size_t m = measurements();
  if (m < 1 || m >= signal_length) {
    throw ConfigError("sensing rate " + std::to_string(rate) + " gives " + std::to_string(m) +
                      " measurements for N = " + std::to_string(signal_length));
  }
  if (width_factor != 1 && width_factor != 2) {
    throw ConfigError("width factor must be 1 or 2");
  }
  if (depth < 1) {
    throw ConfigError("depth must be at least 1");
  }
}

std::size_t NetworkParams::input_size() const {
  return layers.empty() ? 0 : layers.front().inputs();
}

std::size_t NetworkParams::output_size() const {
  return layers.empty() ? 0 : layers.back().outputs();
}

void NetworkParams::validate() const {
  if (layers.empty()) {
    throw DimensionError("network has no layers");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.weight.size() == 0) {
      throw DimensionError("layer " + std::to_string(l) + " has an empty weight matrix");
    }
    if (layer.bias && static_cast<std::size_t>(layer.bias->size()) != layer.outputs()) {
      throw DimensionError("layer " + std::to_string(l) + " bias length mismatch");
    }
    if (l > 0 && layer.inputs() != layers[l - 1].outputs()) {
      throw DimensionError("layer " + std::to_string(l) + " expects " +
                           std::to_string(layer.inputs()) + " inputs but layer " +
                           std::to_string(l - 1) + " produces " +
                           std::to_string(layers[l - 1].outputs()));
    }
  }
}

std::vector<std::span<double>> NetworkParams::tensors() {
  std::vector<std::span<double>> out;
  for (Layer& layer : layers) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    if (layer.bias) {
      out.emplace_back(layer.bias->data(), static_cast<std::size_t>(layer.bias->size()));
    }
  }
  return out;
}

std::vector<std::span<const double>> NetworkParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const Layer& layer : layers) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    if (layer.bias) {
      out.emplace_back(layer.bias->data(), static_cast<std::size_t>(layer.bias->size()));
    }
  }
  return out;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams out;
  out.layers.reserve(layers.size());
  for (const Layer& layer : layers) {
    Layer z;
    z.weight = Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols());
    if (layer.bias) {
      z.bias = Eigen::VectorXd::Zero(layer.bias->size());
    }
    z.activation = layer.activation;
    out.layers.push_back(std::move(z));
  }
  return out;
}

NetworkParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  auto make_layer = [&rng](std::size_t in, std::size_t out, bool with_bias, Activation act) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer;
    layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    // Fill row by row so the draw order does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = dist(rng);
      }
    }
    if (with_bias) {
      layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    }
    layer.activation = act;
    return layer;
  };

  NetworkParams params;
  const std::size_t n = spec.signal_length;
  const std::size_t m = spec.measurements();
  const std::size_t hidden = spec.hidden_width();
  params.layers.push_back(make_layer(n, m, false, Activation::Linear));
  std::size_t fan_in = m;
  for (std::size_t k = 0; k < spec.depth; ++k) {
    params.layers.push_back(make_layer(fan_in, hidden, true, Activation::Sigmoid));
    fan_in = hidden;
  }
  params.layers.push_back(make_layer(fan_in, n, true, spec.output_activation));
  return params;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x,
                              ForwardCache* cache) {
  if (params.layers.empty() || static_cast<std::size_t>(x.rows()) != params.input_size()) {
    throw DimensionError("forward: input length " + std::to_string(x.rows()) +
                         " does not match network input " +
                         std::to_string(params.input_size()));
  }
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Eigen::MatrixXd a = x;
  for (const Layer& layer : params.layers) {
    Eigen::MatrixXd z = layer.weight * a;
    if (layer.bias) {
      z.colwise() += *layer.bias;
    }
    a = activate(z, layer.activation);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }
  return a;
}

std::pair<SignalVector, ForwardCache> forward(const NetworkParams& params,
                                              const SignalVector& x) {
  ForwardCache cache;
  Eigen::MatrixXd y = forward_batch(params, x, &cache);
  return {SignalVector(y.col(0)), std::move(cache)};
}

NetworkGradients backward(const NetworkParams& params, const ForwardCache& cache,
                          const Eigen::MatrixXd& grad_output) {
  const std::size_t n_layers = params.layers.size();
  if (cache.post.size() != n_layers || cache.pre.size() != n_layers) {
    throw DimensionError("backward: cache does not match the network depth");
  }
  if (grad_output.rows() != cache.post.back().rows() ||
      grad_output.cols() != cache.post.back().cols()) {
    throw DimensionError("backward: output gradient shape mismatch");
  }

  NetworkGradients grads = params.zeros_like();
  Eigen::MatrixXd delta = grad_output;  // dL/d(post-activation) of layer l
  for (std::size_t l = n_layers; l-- > 0;) {
    const Layer& layer = params.layers[l];
    if (layer.activation == Activation::Sigmoid) {
      const Eigen::MatrixXd& s = cache.post[l];
      delta.array() *= s.array() * (1.0 - s.array());
    }
    const Eigen::MatrixXd& input = l == 0 ? cache.input : cache.post[l - 1];
    grads.layers[l].weight.noalias() = delta * input.transpose();
    if (layer.bias) {
      *grads.layers[l].bias = delta.rowwise().sum();
    }
    if (l > 0) {
      delta = layer.weight.transpose() * delta;
    }
  }
  return grads;
}

MseReport mse_loss_and_grad(const SignalVector& x, const SignalVector& y_hat) {
  if (x.size() != y_hat.size()) {
    throw DimensionError("mse: length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y_hat.size()));
  }
  const double n = static_cast<double>(x.size());
  const SignalVector diff = y_hat - x;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

Eigen::MatrixXd extract_sensing_matrix(const NetworkParams& params) {
  if (params.layers.empty()) {
    throw DimensionError("network has no sensing layer");
  }
  return params.layers.front().weight;
}

SignalVector apply_sensing(const Eigen::MatrixXd& phi, const SignalVector& x) {
  if (phi.cols() != x.size()) {
    throw DimensionError("sensing matrix has " + std::to_string(phi.cols()) +
                         " columns but the signal has length " + std::to_string(x.size()));
  }
  return phi * x;
}

}  // namespace cssim
