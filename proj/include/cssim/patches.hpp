#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cssim/image.hpp"

namespace cssim {

/// All stride-1 P x P windows of an image, one per column. Column i is the
/// row-major flattening of the window whose top-left corner is the i-th
/// corner in row-major order.
struct PatchMatrix {
  std::size_t patch_size = 0;
  std::size_t rows_of_windows = 0;  // H - P + 1
  std::size_t cols_of_windows = 0;  // W - P + 1
  Eigen::MatrixXd data;             // P^2 x N_S

  std::size_t n_windows() const { return rows_of_windows * cols_of_windows; }
  std::size_t pixels_per_window() const { return patch_size * patch_size; }
};

/// P^2 indicator kernels; kernel k is zero except for a 1 at (k / P, k % P).
using ExtractionKernels = std::vector<Eigen::MatrixXd>;

ExtractionKernels build_extraction_kernels(std::size_t patch_size);

/// Valid-mode 2-D cross-correlation (no kernel flip). Zero taps are skipped,
/// so an indicator kernel costs one read per output pixel.
Eigen::MatrixXd correlate_valid(const Image& img, const Eigen::MatrixXd& kernel);

/// Correlates the image with every extraction kernel; output plane k becomes
/// row k of the patch matrix.
PatchMatrix extract_patches(const Image& img, std::size_t patch_size);

/// Direct nested-loop gather with the same contract as extract_patches.
PatchMatrix extract_patches_naive(const Image& img, std::size_t patch_size);

/// Moments of one window pair. Variance and covariance use 1/(N_P - 1).
struct WindowMoments {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov_xy = 0.0;
};

using WindowStats = std::vector<WindowMoments>;

/// Cached x-side moments (mean, variance) of every window of a reference
/// image; lets training skip recomputing them each epoch.
struct ReferenceMoments {
  std::vector<double> mu;
  std::vector<double> var;
};

ReferenceMoments reference_moments(const PatchMatrix& px);

WindowStats window_stats(const PatchMatrix& px, const PatchMatrix& py);

/// Same as window_stats but reuses the x-side mean and variance.
WindowStats window_stats(const PatchMatrix& px, const PatchMatrix& py,
                         const ReferenceMoments& cached_x);

/// Number of windows covering pixel (r, c), used for diagnostics and tests.
std::size_t window_membership(std::size_t r, std::size_t c, std::size_t height,
                              std::size_t width, std::size_t patch_size);

}  // namespace cssim
