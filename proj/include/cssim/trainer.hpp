#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cssim/checkpoint.hpp"
#include "cssim/dataset.hpp"
#include "cssim/network.hpp"
#include "cssim/optimizer.hpp"
#include "cssim/ssim.hpp"

namespace cssim {

enum class LossKind { Ssim, Mse };
enum class MonitorKind { Validation, Train };

std::string to_string(LossKind k);
std::string to_string(WeightKind k);
std::string to_string(MonitorKind k);
std::string to_string(Activation a);
LossKind parse_loss_kind(const std::string& s);
WeightKind parse_weight_kind(const std::string& s);
MonitorKind parse_monitor_kind(const std::string& s);
Activation parse_activation_kind(const std::string& s);

struct TrainConfig {
  ArchitectureSpec arch;
  LossKind loss = LossKind::Ssim;
  WeightKind weighting = WeightKind::LogVariance;
  WeightKind eval_weighting = WeightKind::Uniform;
  std::size_t window = kDefaultWindow;
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t patience = 50;
  std::size_t max_epochs = 2000;
  std::uint64_t seed = 0;
  MonitorKind monitor = MonitorKind::Validation;
  // Zeroes wall-clock fields in logs so repeated runs are byte-identical.
  bool reproducible = false;
  // Precompute the reference images' window mean/variance once.
  bool cache_reference_stats = false;
  std::size_t threads = 1;

  std::filesystem::path data_dir;
  std::optional<std::size_t> subset_train;
  std::optional<std::size_t> subset_test;
  double val_fraction = 0.05;
  std::filesystem::path out_dir = ".";

  /// Throws ConfigError.
  void validate() const;

  /// Flat echo stored in checkpoints.
  KeyValues to_key_values() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
  double elapsed_seconds = 0.0;
};

/// "<epoch> <train_loss> <validation_loss|nan> <elapsed_seconds>"
std::string format_log_line(const EpochLog& e);
inline constexpr const char* kLogHeader = "# epoch train_loss validation_loss elapsed_seconds";

enum class StopReason { Patience, MaxEpochs };

struct TrainResult {
  Checkpoint best;  // snapshot taken at the best monitored epoch
  std::vector<EpochLog> log;
  StopReason reason = StopReason::MaxEpochs;
  std::size_t epochs_run = 0;
};

/// Per-sample losses and output gradients for one batch. Column j of
/// `grad_output` is dL_j/dy_hat_j scaled by 1/batch so that backward yields
/// the batch-mean gradient.
struct BatchLoss {
  std::vector<double> losses;
  Eigen::MatrixXd grad_output;
};

BatchLoss batch_loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y_hat,
                              std::size_t height, std::size_t width, const TrainConfig& cfg,
                              const std::vector<const ReferenceMoments*>& cached = {});

/// forward -> loss -> backward -> Adam on one batch (columns of x).
/// Returns the batch-mean loss before the update. Throws NumericError on a
/// non-finite loss.
double train_step(NetworkParams& params, AdamState& adam, const Eigen::MatrixXd& x,
                  std::size_t height, std::size_t width, const TrainConfig& cfg,
                  const std::vector<const ReferenceMoments*>& cached = {});

/// Mean training-objective loss over `images` (no parameter update).
double mean_loss(const NetworkParams& params, const std::vector<Image>& images,
                 const TrainConfig& cfg);

/// Full training loop; returns the best checkpoint. `resume` continues from
/// a checkpoint that carries optimizer state.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::function<void(const EpochLog&)>& on_epoch = {},
                  const Checkpoint* resume = nullptr);

struct EvalReport {
  double mean_ssim = 0.0;
  double mean_mse = 0.0;
  std::vector<double> ssim;  // per image
  std::vector<double> mse;   // per image
};

EvalReport evaluate(const NetworkParams& params, const std::vector<Image>& images,
                    std::size_t window = kDefaultWindow,
                    WeightKind weighting = WeightKind::Uniform, std::size_t threads = 1);

/// Key-value table: one "key value" pair per line.
void write_eval_report(std::ostream& out, const EvalReport& report, const KeyValues& context);

Image reconstruct(const NetworkParams& params, const Image& image);

}  // namespace cssim
