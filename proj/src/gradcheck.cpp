#include "cssim/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cssim/network.hpp"
#include "cssim/patches.hpp"
#include "cssim/seeds.hpp"
#include "cssim/ssim.hpp"
#include "cssim/trainer.hpp"

namespace cssim {

namespace {

struct Tally {
  GradCheckResult r;

  void compare(double analytic, double numeric, double negligible) {
    if (std::abs(analytic) < negligible && std::abs(numeric) < negligible) {
      return;
    }
    r.coordinates += 1;
    r.worst_relative_error = std::max(r.worst_relative_error, relative_error(analytic, numeric));
  }

  GradCheckResult finish() {
    r.passed = r.coordinates > 0 && r.worst_relative_error < r.tolerance;
    return r;
  }
};

Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

// Half the pairs are independent, half are a noisy copy of the reference.
Image partner_image(const Image& x, std::size_t index, std::mt19937_64& rng) {
  if (index % 2 == 0) {
    return random_image(x.height(), x.width(), rng);
  }
  std::normal_distribution<double> noise(0.0, 0.1);
  Image y = x;
  for (double& v : y.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return y;
}

template <typename F>
double central_difference(F&& f, double& coord, double step) {
  const double saved = coord;
  coord = saved + step;
  const double plus = f();
  coord = saved - step;
  const double minus = f();
  coord = saved;
  return (plus - minus) / (2.0 * step);
}

// Extended-precision re-evaluation of the SSIM objectives. Pixel `k` of y is
// shifted by `delta` without rounding it back to double.
using Wide = long double;

enum class Target { PatchSsim, PatchWeight, Image };

Wide wide_objective(const Image& x, const Image& y, std::size_t p, WeightKind kind, Target target,
                    std::size_t k, Wide delta) {
  const SsimConstants c;
  const Wide c1 = c.c1, c2 = c.c2;
  const std::size_t w = x.width();
  auto yv = [&](std::size_t r, std::size_t col) {
    const std::size_t i = r * w + col;
    return static_cast<Wide>(y.data()[i]) + (i == k ? delta : 0);
  };
  const Wide np = static_cast<Wide>(p * p);
  Wide num = 0, den = 0, plain = 0;
  std::size_t count = 0;
  for (std::size_t r0 = 0; r0 + p <= x.height(); ++r0) {
    for (std::size_t c0 = 0; c0 + p <= w; ++c0) {
      Wide mx = 0, my = 0;
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          mx += x(r0 + i, c0 + j);
          my += yv(r0 + i, c0 + j);
        }
      mx /= np;
      my /= np;
      Wide vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const Wide dx = x(r0 + i, c0 + j) - mx;
          const Wide dy = yv(r0 + i, c0 + j) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx /= np - 1;
      vy /= np - 1;
      cxy /= np - 1;
      const Wide s = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      const Wide weight =
          kind == WeightKind::LogVariance ? std::log((1 + vx / c2) * (1 + vy / c2)) : Wide{1};
      if (target == Target::PatchSsim) return s;
      if (target == Target::PatchWeight) return weight;
      num += weight * s;
      den += weight;
      plain += s;
      ++count;
    }
  }
  if (kind == WeightKind::Uniform || den < kMinTotalWeight) {
    return plain / static_cast<Wide>(count);
  }
  return num / den;
}

double wide_difference(const Image& x, const Image& y, std::size_t p, WeightKind kind,
                       Target target, std::size_t k, double step) {
  const Wide h = step;
  return static_cast<double>((wide_objective(x, y, p, kind, target, k, h) -
                              wide_objective(x, y, p, kind, target, k, -h)) /
                             (2 * h));
}

GradCheckResult check_patch_gradients(const GradCheckOptions& o, WeightKind kind) {
  Tally t;
  t.r.suite = kind == WeightKind::Uniform ? "ssim_patch" : "log_weight";
  t.r.tolerance = o.ssim_tolerance;
  std::mt19937_64 rng(derive_seed(o.seed, t.r.suite));
  const SsimConstants c;
  const Target target = kind == WeightKind::Uniform ? Target::PatchSsim : Target::PatchWeight;
  for (std::size_t n = 0; n < o.image_pairs; ++n) {
    const std::size_t p = std::array<std::size_t, 3>{2, 4, 8}[n % 3];
    const Image xi = random_image(p, p, rng);
    const Image yi = partner_image(xi, n, rng);
    const PatchMatrix px = extract_patches(xi, p);
    const PatchMatrix py = extract_patches(yi, p);
    const WindowMoments m = window_stats(px, py).front();
    const Eigen::VectorXd analytic =
        kind == WeightKind::Uniform
            ? grad_ssim_patch(px.data.col(0), py.data.col(0), m, ssim_components({m}, c).front())
            : grad_weight_patch(py.data.col(0), m, kind, c);
    for (std::size_t k = 0; k < yi.size(); ++k) {
      t.compare(analytic(static_cast<Eigen::Index>(k)),
                wide_difference(xi, yi, p, kind, target, k, o.step), o.negligible);
    }
    t.r.cases += 1;
  }
  return t.finish();
}

GradCheckResult check_image_gradients(const GradCheckOptions& o, WeightKind kind) {
  Tally t;
  t.r.suite = "ssim_image_" + to_string(kind);
  t.r.tolerance = o.ssim_tolerance;
  std::mt19937_64 rng(derive_seed(o.seed, t.r.suite));
  std::uniform_int_distribution<std::size_t> side(8, 16);
  for (std::size_t n = 0; n < o.image_pairs; ++n) {
    const std::size_t p = std::array<std::size_t, 3>{2, 4, 8}[n % 3];
    const Image x = random_image(side(rng), side(rng), rng);
    const Image y = partner_image(x, n, rng);
    const Image analytic = grad_ssim_image(x, y, p, kind);
    for (std::size_t k = 0; k < y.size(); ++k) {
      t.compare(analytic.data()[k], wide_difference(x, y, p, kind, Target::Image, k, o.step),
                o.negligible);
    }
    t.r.cases += 1;
  }
  return t.finish();
}

GradCheckResult check_network_gradients(const GradCheckOptions& o, LossKind loss) {
  Tally t;
  t.r.suite = "network_" + to_string(loss);
  t.r.tolerance = o.network_tolerance;
  std::mt19937_64 rng(derive_seed(o.seed, t.r.suite));

  TrainConfig cfg;
  cfg.arch.signal_length = 16;
  cfg.arch.rate = 0.25;
  cfg.arch.width_factor = 1;
  cfg.arch.depth = 1;
  cfg.loss = loss;
  cfg.weighting = WeightKind::LogVariance;
  cfg.window = 2;

  NetworkParams params = init_params(cfg.arch, derive_seed(o.seed, "network-init"));
  constexpr std::size_t kBatch = 3;
  Eigen::MatrixXd x(16, kBatch);
  for (std::size_t j = 0; j < kBatch; ++j) {
    x.col(static_cast<Eigen::Index>(j)) = flatten(random_image(4, 4, rng));
  }

  auto value = [&] {
    const Eigen::MatrixXd y_hat = forward_batch(params, x);
    const BatchLoss bl = batch_loss_and_grad(x, y_hat, 4, 4, cfg);
    double total = 0.0;
    for (double l : bl.losses) total += l;
    return total / static_cast<double>(kBatch);
  };

  ForwardCache cache;
  const Eigen::MatrixXd y_hat = forward_batch(params, x, &cache);
  const NetworkGradients grads =
      backward(params, cache, batch_loss_and_grad(x, y_hat, 4, 4, cfg).grad_output);
  const auto analytic = grads.tensors();
  auto coords = params.tensors();
  for (std::size_t k = 0; k < coords.size(); ++k) {
    for (std::size_t i = 0; i < coords[k].size(); ++i) {
      t.compare(analytic[k][i], central_difference(value, coords[k][i], o.step), o.negligible);
    }
  }
  t.r.cases = 1;
  return t.finish();
}

}  // namespace

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& opts) {
  return {
      check_patch_gradients(opts, WeightKind::Uniform),
      check_patch_gradients(opts, WeightKind::LogVariance),
      check_image_gradients(opts, WeightKind::Uniform),
      check_image_gradients(opts, WeightKind::LogVariance),
      check_network_gradients(opts, LossKind::Ssim),
      check_network_gradients(opts, LossKind::Mse),
  };
}

}  // namespace cssim
