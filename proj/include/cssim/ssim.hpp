#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cssim/image.hpp"
#include "cssim/patches.hpp"

namespace cssim {

/// Stabilizers for a dynamic range of 1: C1 = 0.01^2, C2 = 0.03^2.
struct SsimConstants {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

struct SsimTerms {
  double a1 = 0.0;  // 2 mu_x mu_y + C1
  double a2 = 0.0;  // 2 cov_xy + C2
  double b1 = 0.0;  // mu_x^2 + mu_y^2 + C1
  double b2 = 0.0;  // var_x + var_y + C2
};

using SsimComponents = std::vector<SsimTerms>;

enum class WeightKind { Uniform, LogVariance };

/// Below this total weight the whole-image average falls back to uniform.
inline constexpr double kMinTotalWeight = 1e-12;

/// Default window side.
inline constexpr std::size_t kDefaultWindow = 8;

SsimComponents ssim_components(const WindowStats& stats, const SsimConstants& c = {});

double ssim_patch(const SsimTerms& t);
std::vector<double> ssim_patch(const SsimComponents& comp);

/// Uniform: 1. LogVariance: log[(1 + var_x / C2)(1 + var_y / C2)].
double window_weight(const WindowMoments& m, WeightKind kind, const SsimConstants& c = {});
std::vector<double> window_weights(const WindowStats& stats, WeightKind kind,
                                   const SsimConstants& c = {});

/// Weighted mean of per-window SSIM over all stride-1 windows.
double ssim_image(const Image& x, const Image& y, std::size_t patch_size,
                  WeightKind kind = WeightKind::Uniform, const SsimConstants& c = {});

/// dS/dy for one window; x and y are the window columns.
Eigen::VectorXd grad_ssim_patch(const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const WindowMoments& m, const SsimTerms& t);

/// dW/dy for one window: 2/(N_P - 1) (y - mu_y) / (C2 + var_y) for the log
/// weight, zero for uniform weights.
Eigen::VectorXd grad_weight_patch(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const WindowMoments& m, WeightKind kind,
                                  const SsimConstants& c = {});

/// dS(X, Y)/dY. Per-window gradients are scatter-added to their window
/// location, then combined with the global sums of W and W S.
Image grad_ssim_image(const Image& x, const Image& y, std::size_t patch_size,
                      WeightKind kind = WeightKind::Uniform, const SsimConstants& c = {});

struct LossReport {
  double loss = 0.0;
  double ssim = 0.0;
  Image gradient;  // d loss / d Y
};

/// loss = 1 - S(X, Y), gradient = -dS/dY. `cached_x` (optional) supplies the
/// reference image's window mean and variance.
LossReport ssim_loss_and_grad(const Image& x, const Image& y, std::size_t patch_size,
                              WeightKind kind = WeightKind::Uniform,
                              const SsimConstants& c = {},
                              const ReferenceMoments* cached_x = nullptr);

}  // namespace cssim
