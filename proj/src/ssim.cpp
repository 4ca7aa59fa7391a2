#include "cssim/ssim.hpp"

#include <cmath>

#include "cssim/errors.hpp"

namespace cssim {

namespace {

void check_pair(const Image& x, const Image& y, std::size_t patch_size) {
  if (!x.same_shape(y)) {
    throw DimensionError("SSIM inputs differ in shape");
  }
  if (patch_size < 2) {
    throw ConfigError("SSIM window must be at least 2x2");
  }
}

// Adds a window-shaped column into the image buffer at the window's location.
void scatter_add(Image& dst, const PatchMatrix& layout, std::size_t window,
                 const Eigen::Ref<const Eigen::VectorXd>& g) {
  const std::size_t p = layout.patch_size;
  const std::size_t r0 = window / layout.cols_of_windows;
  const std::size_t c0 = window % layout.cols_of_windows;
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j, ++k) {
      dst(r0 + i, c0 + j) += g(k);
    }
  }
}

struct Evaluation {
  PatchMatrix px;
  PatchMatrix py;
  WindowStats stats;
  SsimComponents comp;
  std::vector<double> s;
  std::vector<double> w;  // empty when the uniform path is taken
  double value = 0.0;
};

bool effectively_uniform(WeightKind kind, const std::vector<double>& w, double& total) {
  if (kind == WeightKind::Uniform) {
    return true;
  }
  total = 0.0;
  for (double wi : w) {
    total += wi;
  }
  return total < kMinTotalWeight;
}

Evaluation evaluate(const Image& x, const Image& y, std::size_t patch_size, WeightKind kind,
                    const SsimConstants& c, const ReferenceMoments* cached_x) {
  check_pair(x, y, patch_size);
  Evaluation e;
  e.px = extract_patches(x, patch_size);
  e.py = extract_patches(y, patch_size);
  e.stats = cached_x ? window_stats(e.px, e.py, *cached_x) : window_stats(e.px, e.py);
  e.comp = ssim_components(e.stats, c);
  e.s = ssim_patch(e.comp);

  double total_w = 0.0;
  if (kind != WeightKind::Uniform) {
    e.w = window_weights(e.stats, kind, c);
  }
  if (effectively_uniform(kind, e.w, total_w)) {
    e.w.clear();
    double sum = 0.0;
    for (double si : e.s) {
      sum += si;
    }
    e.value = sum / static_cast<double>(e.s.size());
  } else {
    double weighted = 0.0;
    for (std::size_t i = 0; i < e.s.size(); ++i) {
      weighted += e.w[i] * e.s[i];
    }
    e.value = weighted / total_w;
  }
  return e;
}

Image gradient_of(const Evaluation& e, WeightKind kind, const SsimConstants& c) {
  const std::size_t n = e.s.size();
  Image grad(e.px.rows_of_windows + e.px.patch_size - 1,
             e.px.cols_of_windows + e.px.patch_size - 1, 0.0);

  if (e.w.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = e.px.data.col(static_cast<Eigen::Index>(i));
      const auto yi = e.py.data.col(static_cast<Eigen::Index>(i));
      scatter_add(grad, e.px, i, grad_ssim_patch(xi, yi, e.stats[i], e.comp[i]));
    }
    const double ns = static_cast<double>(n);
    for (double& g : grad.data()) {
      g /= ns;
    }
    return grad;
  }

  // Quotient rule on U / V with U = sum W_i S_i and V = sum W_i.
  Image num(grad.height(), grad.width(), 0.0);
  Image dw(grad.height(), grad.width(), 0.0);
  double u = 0.0;
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = e.px.data.col(static_cast<Eigen::Index>(i));
    const auto yi = e.py.data.col(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd gs = grad_ssim_patch(xi, yi, e.stats[i], e.comp[i]);
    const Eigen::VectorXd gw = grad_weight_patch(yi, e.stats[i], kind, c);
    scatter_add(num, e.px, i, gw * e.s[i] + e.w[i] * gs);
    scatter_add(dw, e.px, i, gw);
    u += e.w[i] * e.s[i];
    v += e.w[i];
  }
  const double scale = u / (v * v);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad.data()[k] = num.data()[k] / v - scale * dw.data()[k];
  }
  return grad;
}

}  // namespace

SsimComponents ssim_components(const WindowStats& stats, const SsimConstants& c) {
  SsimComponents comp(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const WindowMoments& m = stats[i];
    comp[i].a1 = 2.0 * m.mu_x * m.mu_y + c.c1;
    comp[i].a2 = 2.0 * m.cov_xy + c.c2;
    comp[i].b1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + c.c1;
    comp[i].b2 = m.var_x + m.var_y + c.c2;
  }
  return comp;
}

double ssim_patch(const SsimTerms& t) { return (t.a1 * t.a2) / (t.b1 * t.b2); }

std::vector<double> ssim_patch(const SsimComponents& comp) {
  std::vector<double> s(comp.size());
  for (std::size_t i = 0; i < comp.size(); ++i) {
    s[i] = ssim_patch(comp[i]);
  }
  return s;
}

double window_weight(const WindowMoments& m, WeightKind kind, const SsimConstants& c) {
  if (kind == WeightKind::Uniform) {
    return 1.0;
  }
  return std::log((1.0 + m.var_x / c.c2) * (1.0 + m.var_y / c.c2));
}

std::vector<double> window_weights(const WindowStats& stats, WeightKind kind,
                                   const SsimConstants& c) {
  std::vector<double> w(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    w[i] = window_weight(stats[i], kind, c);
  }
  return w;
}

double ssim_image(const Image& x, const Image& y, std::size_t patch_size, WeightKind kind,
                  const SsimConstants& c) {
  return evaluate(x, y, patch_size, kind, c, nullptr).value;
}

Eigen::VectorXd grad_ssim_patch(const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const WindowMoments& m, const SsimTerms& t) {
  const double np = static_cast<double>(y.size());
  const double grad_a1 = 2.0 * m.mu_x / np;  // times the all-ones vector
  const double grad_b1 = 2.0 * m.mu_y / np;
  const Eigen::ArrayXd grad_a2 = 2.0 * (x.array() - m.mu_x) / (np - 1.0);
  const Eigen::ArrayXd grad_b2 = 2.0 * (y.array() - m.mu_y) / (np - 1.0);

  const Eigen::ArrayXd grad_num = grad_a1 * t.a2 + t.a1 * grad_a2;
  const Eigen::ArrayXd grad_den = grad_b1 * t.b2 + t.b1 * grad_b2;
  const double den = t.b1 * t.b2;
  const double num = t.a1 * t.a2;
  return (grad_num / den - (num / (den * den)) * grad_den).matrix();
}

Eigen::VectorXd grad_weight_patch(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const WindowMoments& m, WeightKind kind,
                                  const SsimConstants& c) {
  if (kind == WeightKind::Uniform) {
    return Eigen::VectorXd::Zero(y.size());
  }
  const double np = static_cast<double>(y.size());
  return ((2.0 / (np - 1.0)) * (y.array() - m.mu_y) / (c.c2 + m.var_y)).matrix();
}

Image grad_ssim_image(const Image& x, const Image& y, std::size_t patch_size, WeightKind kind,
                      const SsimConstants& c) {
  const Evaluation e = evaluate(x, y, patch_size, kind, c, nullptr);
  return gradient_of(e, kind, c);
}

LossReport ssim_loss_and_grad(const Image& x, const Image& y, std::size_t patch_size,
                              WeightKind kind, const SsimConstants& c,
                              const ReferenceMoments* cached_x) {
  const Evaluation e = evaluate(x, y, patch_size, kind, c, cached_x);
  LossReport report;
  report.ssim = e.value;
  report.loss = 1.0 - e.value;
  report.gradient = gradient_of(e, kind, c);
  for (double& g : report.gradient.data()) {
    g = -g;
  }
  return report;
}

}  // namespace cssim
