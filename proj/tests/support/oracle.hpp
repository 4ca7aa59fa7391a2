#pragma once

// Independent reference computations used only by tests. Everything here is
// written as straight loops in long double and shares no code with the
// library's evaluation path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "cssim/image.hpp"
#include "cssim/network.hpp"

namespace oracle {

using Real = long double;

inline constexpr Real kC1 = 0.0001L;
inline constexpr Real kC2 = 0.0009L;

struct Raster {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<Real> v;
  Real at(std::size_t r, std::size_t c) const { return v[r * w + c]; }
};

inline Raster from_image(const cssim::Image& img) {
  Raster r{img.height(), img.width(), {}};
  r.v.assign(img.data().begin(), img.data().end());
  return r;
}

struct Moments {
  Real mx = 0, my = 0, vx = 0, vy = 0, cxy = 0;
};

inline Moments window_moments(const Raster& x, const Raster& y, std::size_t r0, std::size_t c0,
                              std::size_t p) {
  const Real n = static_cast<Real>(p * p);
  Moments m;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      m.mx += x.at(r0 + i, c0 + j);
      m.my += y.at(r0 + i, c0 + j);
    }
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const Real dx = x.at(r0 + i, c0 + j) - m.mx;
      const Real dy = y.at(r0 + i, c0 + j) - m.my;
      m.vx += dx * dx;
      m.vy += dy * dy;
      m.cxy += dx * dy;
    }
  }
  m.vx /= n - 1;
  m.vy /= n - 1;
  m.cxy /= n - 1;
  return m;
}

inline Real window_ssim(const Moments& m) {
  const Real a1 = 2 * m.mx * m.my + kC1;
  const Real a2 = 2 * m.cxy + kC2;
  const Real b1 = m.mx * m.mx + m.my * m.my + kC1;
  const Real b2 = m.vx + m.vy + kC2;
  return a1 * a2 / (b1 * b2);
}

inline Real log_weight(const Moments& m) {
  return std::log((1 + m.vx / kC2) * (1 + m.vy / kC2));
}

/// Whole-image SSIM with optional log-variance weights and the uniform
/// fallback for a vanishing total weight.
inline Real image_ssim(const Raster& x, const Raster& y, std::size_t p, bool log_weights) {
  Real num = 0, den = 0, plain = 0;
  std::size_t count = 0;
  for (std::size_t r0 = 0; r0 + p <= x.h; ++r0) {
    for (std::size_t c0 = 0; c0 + p <= x.w; ++c0) {
      const Moments m = window_moments(x, y, r0, c0, p);
      const Real s = window_ssim(m);
      const Real w = log_weights ? log_weight(m) : 1;
      num += w * s;
      den += w;
      plain += s;
      ++count;
    }
  }
  if (!log_weights || den < 1e-12L) {
    return plain / static_cast<Real>(count);
  }
  return num / den;
}

/// f(delta) evaluates the function with one coordinate shifted by delta.
template <typename F>
double central_difference(F&& f, Real step) {
  return static_cast<double>((f(step) - f(-step)) / (2 * step));
}

/// Layer-by-layer forward pass in long double.
inline std::vector<Real> network_forward(const std::vector<std::vector<std::vector<Real>>>& weights,
                                         const std::vector<std::vector<Real>>& biases,
                                         const std::vector<bool>& has_bias,
                                         const std::vector<cssim::Activation>& acts,
                                         std::vector<Real> a) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<Real> z(weights[l].size(), 0);
    for (std::size_t o = 0; o < z.size(); ++o) {
      Real acc = has_bias[l] ? biases[l][o] : 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        acc += weights[l][o][i] * a[i];
      }
      z[o] = acts[l] == cssim::Activation::Sigmoid ? 1 / (1 + std::exp(-acc)) : acc;
    }
    a = std::move(z);
  }
  return a;
}

/// Long double copy of a network for perturbation experiments.
struct RealNetwork {
  std::vector<std::vector<std::vector<Real>>> weights;
  std::vector<std::vector<Real>> biases;
  std::vector<bool> has_bias;
  std::vector<cssim::Activation> acts;

  explicit RealNetwork(const cssim::NetworkParams& p) {
    for (const auto& layer : p.layers) {
      std::vector<std::vector<Real>> w(layer.outputs(), std::vector<Real>(layer.inputs()));
      for (std::size_t o = 0; o < layer.outputs(); ++o)
        for (std::size_t i = 0; i < layer.inputs(); ++i)
          w[o][i] = layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i));
      weights.push_back(std::move(w));
      std::vector<Real> b(layer.outputs(), 0);
      if (layer.bias)
        for (std::size_t o = 0; o < layer.outputs(); ++o) b[o] = (*layer.bias)(static_cast<Eigen::Index>(o));
      biases.push_back(std::move(b));
      has_bias.push_back(layer.bias.has_value());
      acts.push_back(layer.activation);
    }
  }

  std::vector<Real> forward(const std::vector<Real>& x) const {
    return network_forward(weights, biases, has_bias, acts, x);
  }
};

inline cssim::Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cssim::Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

/// Reference image plus either an independent image or a noisy copy.
inline cssim::Image partner(const cssim::Image& x, bool noisy_copy, std::mt19937_64& rng) {
  if (!noisy_copy) return random_image(x.height(), x.width(), rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  cssim::Image y = x;
  for (double& v : y.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return y;
}

inline double relative_error(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace oracle
