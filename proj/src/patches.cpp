#include "cssim/patches.hpp"

#include <algorithm>
#include <string>

#include "cssim/errors.hpp"

namespace cssim {

namespace {

void check_extractable(const Image& img, std::size_t p) {
  if (p < 1) {
    throw ConfigError("patch size must be at least 1");
  }
  if (p > std::min(img.height(), img.width())) {
    throw DimensionError("patch size " + std::to_string(p) + " exceeds image " +
                         std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
}

PatchMatrix empty_patch_matrix(const Image& img, std::size_t p) {
  PatchMatrix out;
  out.patch_size = p;
  out.rows_of_windows = img.height() - p + 1;
  out.cols_of_windows = img.width() - p + 1;
  out.data.resize(static_cast<Eigen::Index>(p * p),
                  static_cast<Eigen::Index>(out.n_windows()));
  return out;
}

double column_mean(const Eigen::Ref<const Eigen::VectorXd>& col) {
  return col.sum() / static_cast<double>(col.size());
}

double column_var(const Eigen::Ref<const Eigen::VectorXd>& col, double mu) {
  return (col.array() - mu).square().sum() / static_cast<double>(col.size() - 1);
}

void check_stats_inputs(const PatchMatrix& px, const PatchMatrix& py) {
  if (px.data.rows() != py.data.rows() || px.data.cols() != py.data.cols()) {
    throw DimensionError("window_stats: patch matrices differ in shape");
  }
  if (px.data.rows() < 2) {
    throw ConfigError("window_stats: need at least 2 pixels per window");
  }
}

}  // namespace

ExtractionKernels build_extraction_kernels(std::size_t patch_size) {
  if (patch_size < 1) {
    throw ConfigError("patch size must be at least 1");
  }
  const auto p = static_cast<Eigen::Index>(patch_size);
  ExtractionKernels kernels;
  kernels.reserve(patch_size * patch_size);
  for (Eigen::Index k = 0; k < p * p; ++k) {
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(p, p);
    kernel(k / p, k % p) = 1.0;
    kernels.push_back(std::move(kernel));
  }
  return kernels;
}

Eigen::MatrixXd correlate_valid(const Image& img, const Eigen::MatrixXd& kernel) {
  const auto kh = static_cast<std::size_t>(kernel.rows());
  const auto kw = static_cast<std::size_t>(kernel.cols());
  if (kh > img.height() || kw > img.width() || kh == 0 || kw == 0) {
    throw DimensionError("correlation kernel does not fit inside the image");
  }
  const std::size_t oh = img.height() - kh + 1;
  const std::size_t ow = img.width() - kw + 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(oh),
                                              static_cast<Eigen::Index>(ow));
  for (std::size_t i = 0; i < kh; ++i) {
    for (std::size_t j = 0; j < kw; ++j) {
      const double tap = kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (tap == 0.0) {
        continue;
      }
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
          out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +=
              tap * img(r + i, c + j);
        }
      }
    }
  }
  return out;
}

PatchMatrix extract_patches(const Image& img, std::size_t patch_size) {
  check_extractable(img, patch_size);
  PatchMatrix out = empty_patch_matrix(img, patch_size);
  const auto kernels = build_extraction_kernels(patch_size);
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const Eigen::MatrixXd plane = correlate_valid(img, kernels[k]);
    // Row-major flattening of the response plane orders windows by corner.
    auto row = out.data.row(static_cast<Eigen::Index>(k));
    for (Eigen::Index r = 0; r < plane.rows(); ++r) {
      for (Eigen::Index c = 0; c < plane.cols(); ++c) {
        row(r * plane.cols() + c) = plane(r, c);
      }
    }
  }
  return out;
}

PatchMatrix extract_patches_naive(const Image& img, std::size_t patch_size) {
  check_extractable(img, patch_size);
  PatchMatrix out = empty_patch_matrix(img, patch_size);
  Eigen::Index col = 0;
  for (std::size_t r0 = 0; r0 < out.rows_of_windows; ++r0) {
    for (std::size_t c0 = 0; c0 < out.cols_of_windows; ++c0, ++col) {
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < patch_size; ++i) {
        for (std::size_t j = 0; j < patch_size; ++j, ++row) {
          out.data(row, col) = img(r0 + i, c0 + j);
        }
      }
    }
  }
  return out;
}

ReferenceMoments reference_moments(const PatchMatrix& px) {
  if (px.data.rows() < 2) {
    throw ConfigError("reference_moments: need at least 2 pixels per window");
  }
  ReferenceMoments m;
  m.mu.resize(static_cast<std::size_t>(px.data.cols()));
  m.var.resize(m.mu.size());
  for (Eigen::Index i = 0; i < px.data.cols(); ++i) {
    const auto col = px.data.col(i);
    const double mu = column_mean(col);
    m.mu[static_cast<std::size_t>(i)] = mu;
    m.var[static_cast<std::size_t>(i)] = column_var(col, mu);
  }
  return m;
}

WindowStats window_stats(const PatchMatrix& px, const PatchMatrix& py) {
  check_stats_inputs(px, py);
  return window_stats(px, py, reference_moments(px));
}

WindowStats window_stats(const PatchMatrix& px, const PatchMatrix& py,
                         const ReferenceMoments& cached_x) {
  check_stats_inputs(px, py);
  const auto n = static_cast<std::size_t>(px.data.cols());
  if (cached_x.mu.size() != n || cached_x.var.size() != n) {
    throw DimensionError("window_stats: cached moments do not match window count");
  }
  const double denom = static_cast<double>(px.data.rows() - 1);
  WindowStats stats(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = px.data.col(static_cast<Eigen::Index>(i));
    const auto yi = py.data.col(static_cast<Eigen::Index>(i));
    WindowMoments& m = stats[i];
    m.mu_x = cached_x.mu[i];
    m.var_x = cached_x.var[i];
    m.mu_y = column_mean(yi);
    m.var_y = column_var(yi, m.mu_y);
    m.cov_xy = ((xi.array() - m.mu_x) * (yi.array() - m.mu_y)).sum() / denom;
  }
  return stats;
}

std::size_t window_membership(std::size_t r, std::size_t c, std::size_t height,
                              std::size_t width, std::size_t patch_size) {
  auto axis = [patch_size](std::size_t i, std::size_t extent) -> std::size_t {
    const std::size_t last_corner = extent - patch_size;
    const std::size_t lo = i + 1 >= patch_size ? i + 1 - patch_size : 0;
    const std::size_t hi = std::min(i, last_corner);
    return hi >= lo ? hi - lo + 1 : 0;
  };
  return axis(r, height) * axis(c, width);
}

}  // namespace cssim
