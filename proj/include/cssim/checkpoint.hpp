#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cssim/network.hpp"
#include "cssim/optimizer.hpp"

namespace cssim {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Everything needed to evaluate a model or resume its training.
///
/// On-disk layout (text, line oriented):
///
///   CSSIM-CHECKPOINT
///   version = 1
///   [config]          key = value echo of the training configuration
///   [architecture]    signal_length, rate, width_factor, depth, output_activation
///   [state]           epoch, early_stop.best, early_stop.since, early_stop.patience
///   [layers]          per layer: "layer <i> <linear|sigmoid> <bias|nobias>"
///                     followed by its weight tensor and, if present, bias tensor
///   [adam]            optional; step and hyperparameters, then moment tensors
///   end
///
/// A tensor is "tensor <name> <rows> <cols>" followed by `rows` lines of
/// `cols` space-separated values in shortest round-trip decimal form.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ArchitectureSpec arch;
  NetworkParams params;
  std::optional<AdamState> adam;
  EarlyStop early_stop;
  std::size_t epoch = 0;
  KeyValues config;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);

/// Throws FormatError on any malformed, truncated or wrong-version input.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Detached sensing matrix in the same tensor encoding, under a
/// "CSSIM-TENSORS" header with a single tensor named "phi".
void save_sensing_matrix(const Eigen::MatrixXd& phi, const std::filesystem::path& path);
Eigen::MatrixXd load_sensing_matrix(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_real(double v);

/// Strict full-string parse; throws FormatError.
double parse_real(const std::string& text);

}  // namespace cssim
