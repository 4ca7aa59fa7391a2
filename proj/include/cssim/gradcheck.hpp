#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cssim {

struct GradCheckOptions {
  std::uint64_t seed = 7;
  std::size_t image_pairs = 100;  // per weighting kind
  double step = 1e-6;
  double ssim_tolerance = 1e-5;
  double network_tolerance = 1e-4;
  // Coordinates where both gradients are below this magnitude are skipped.
  double negligible = 1e-8;
};

struct GradCheckResult {
  std::string suite;
  std::size_t cases = 0;
  std::size_t coordinates = 0;
  double worst_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|), 0 when both are 0.
double relative_error(double a, double b);

/// Central-difference checks of the analytic SSIM, weight and network
/// gradients on seeded random inputs.
std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& opts = {});

}  // namespace cssim
