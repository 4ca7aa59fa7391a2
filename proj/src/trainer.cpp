#include "cssim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "cssim/errors.hpp"
#include "cssim/parallel.hpp"
#include "cssim/seeds.hpp"

namespace cssim {

std::string to_string(LossKind k) { return k == LossKind::Ssim ? "ssim" : "mse"; }
std::string to_string(WeightKind k) { return k == WeightKind::Uniform ? "uniform" : "log"; }
std::string to_string(MonitorKind k) {
  return k == MonitorKind::Validation ? "validation" : "train";
}
std::string to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "linear"; }

LossKind parse_loss_kind(const std::string& s) {
  if (s == "ssim") return LossKind::Ssim;
  if (s == "mse") return LossKind::Mse;
  throw ConfigError("unknown loss '" + s + "' (expected ssim or mse)");
}

WeightKind parse_weight_kind(const std::string& s) {
  if (s == "uniform") return WeightKind::Uniform;
  if (s == "log") return WeightKind::LogVariance;
  throw ConfigError("unknown weighting '" + s + "' (expected uniform or log)");
}

MonitorKind parse_monitor_kind(const std::string& s) {
  if (s == "validation") return MonitorKind::Validation;
  if (s == "train") return MonitorKind::Train;
  throw ConfigError("unknown monitor '" + s + "' (expected validation or train)");
}

Activation parse_activation_kind(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "linear") return Activation::Linear;
  throw ConfigError("unknown activation '" + s + "' (expected sigmoid or linear)");
}

void TrainConfig::validate() const {
  arch.validate();
  if (window < 2) throw ConfigError("SSIM window must be at least 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (max_epochs == 0) throw ConfigError("max epochs must be positive");
  if (threads == 0) throw ConfigError("thread count must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
  if (subset_train && *subset_train == 0) throw ConfigError("train subset must be positive");
  if (subset_test && *subset_test == 0) throw ConfigError("test subset must be positive");
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv = {
      {"signal_length", std::to_string(arch.signal_length)},
      {"rate", format_real(arch.rate)},
      {"measurements", std::to_string(arch.measurements())},
      {"width_factor", std::to_string(arch.width_factor)},
      {"depth", std::to_string(arch.depth)},
      {"output_activation", to_string(arch.output_activation)},
      {"loss", to_string(loss)},
      {"weighting", to_string(weighting)},
      {"eval_weighting", to_string(eval_weighting)},
      {"window", std::to_string(window)},
      {"learning_rate", format_real(learning_rate)},
      {"batch_size", std::to_string(batch_size)},
      {"patience", std::to_string(patience)},
      {"max_epochs", std::to_string(max_epochs)},
      {"seed", std::to_string(seed)},
      {"monitor", to_string(monitor)},
      {"val_fraction", format_real(val_fraction)},
  };
  if (subset_train) kv.emplace_back("subset_train", std::to_string(*subset_train));
  if (subset_test) kv.emplace_back("subset_test", std::to_string(*subset_test));
  return kv;
}

std::string format_log_line(const EpochLog& e) {
  std::ostringstream out;
  out << e.epoch << ' ' << format_real(e.train_loss) << ' '
      << (e.validation_loss ? format_real(*e.validation_loss) : std::string("nan")) << ' '
      << std::fixed << std::setprecision(3) << e.elapsed_seconds;
  return out.str();
}

namespace {

void check_images(const std::vector<Image>& images, std::size_t signal_length,
                  const char* what) {
  for (const Image& img : images) {
    if (img.size() != signal_length || !img.same_shape(images.front())) {
      throw DimensionError(std::string(what) + " images must all be " +
                           std::to_string(images.front().height()) + "x" +
                           std::to_string(images.front().width()) + " with " +
                           std::to_string(signal_length) + " pixels");
    }
  }
}

Eigen::MatrixXd gather(const std::vector<Image>& images,
                       std::span<const std::size_t> indices) {
  const auto n = static_cast<Eigen::Index>(images[indices.front()].size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = flatten(images[indices[j]]);
  }
  return x;
}

double sample_loss(const SignalVector& x, const SignalVector& y_hat, std::size_t h,
                   std::size_t w, const TrainConfig& cfg) {
  if (cfg.loss == LossKind::Mse) {
    return (y_hat - x).squaredNorm() / static_cast<double>(x.size());
  }
  return 1.0 - ssim_image(unflatten(x, h, w), unflatten(y_hat, h, w), cfg.window,
                          cfg.weighting);
}

}  // namespace

BatchLoss batch_loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y_hat,
                              std::size_t height, std::size_t width, const TrainConfig& cfg,
                              const std::vector<const ReferenceMoments*>& cached) {
  if (x.rows() != y_hat.rows() || x.cols() != y_hat.cols()) {
    throw DimensionError("batch loss: prediction and target shapes differ");
  }
  const auto batch = static_cast<std::size_t>(x.cols());
  BatchLoss out;
  out.losses.resize(batch);
  out.grad_output.resize(x.rows(), x.cols());
  const double scale = 1.0 / static_cast<double>(batch);
  parallel_for(batch, cfg.threads, [&](std::size_t j) {
    const auto col = static_cast<Eigen::Index>(j);
    const SignalVector xj = x.col(col);
    const SignalVector yj = y_hat.col(col);
    if (cfg.loss == LossKind::Mse) {
      MseReport r = mse_loss_and_grad(xj, yj);
      out.losses[j] = r.loss;
      out.grad_output.col(col) = scale * r.gradient;
    } else {
      const ReferenceMoments* ref = j < cached.size() ? cached[j] : nullptr;
      LossReport r = ssim_loss_and_grad(unflatten(xj, height, width),
                                        unflatten(yj, height, width), cfg.window,
                                        cfg.weighting, SsimConstants{}, ref);
      out.losses[j] = r.loss;
      out.grad_output.col(col) = scale * flatten(r.gradient);
    }
  });
  return out;
}

double train_step(NetworkParams& params, AdamState& adam, const Eigen::MatrixXd& x,
                  std::size_t height, std::size_t width, const TrainConfig& cfg,
                  const std::vector<const ReferenceMoments*>& cached) {
  ForwardCache cache;
  const Eigen::MatrixXd y_hat = forward_batch(params, x, &cache);
  const BatchLoss bl = batch_loss_and_grad(x, y_hat, height, width, cfg, cached);
  double total = 0.0;
  for (double l : bl.losses) {
    total += l;
  }
  const double mean = total / static_cast<double>(bl.losses.size());
  if (!std::isfinite(mean)) {
    throw NumericError("non-finite batch loss");
  }
  const NetworkGradients grads = backward(params, cache, bl.grad_output);
  adam_step(adam, params.tensors(), grads.tensors());
  return mean;
}

double mean_loss(const NetworkParams& params, const std::vector<Image>& images,
                 const TrainConfig& cfg) {
  if (images.empty()) {
    throw ConfigError("mean_loss: no images");
  }
  check_images(images, params.input_size(), "evaluation");
  const std::size_t h = images.front().height();
  const std::size_t w = images.front().width();
  std::vector<double> losses(images.size());
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < images.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(images.size(), begin + cfg.batch_size);
    const Eigen::MatrixXd x = gather(images, std::span(idx).subspan(begin, end - begin));
    const Eigen::MatrixXd y_hat = forward_batch(params, x);
    parallel_for(end - begin, cfg.threads, [&](std::size_t j) {
      const auto col = static_cast<Eigen::Index>(j);
      losses[begin + j] = sample_loss(x.col(col), y_hat.col(col), h, w, cfg);
    });
  }
  double total = 0.0;
  for (double l : losses) {
    total += l;
  }
  return total / static_cast<double>(losses.size());
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::function<void(const EpochLog&)>& on_epoch,
                  const Checkpoint* resume) {
  cfg.validate();
  if (manifest.train.empty()) {
    throw ConfigError("training set is empty");
  }
  const std::size_t n_signal = cfg.arch.signal_length;
  check_images(manifest.train, n_signal, "training");
  if (!manifest.validation.empty()) {
    check_images(manifest.validation, n_signal, "validation");
  }
  const std::size_t h = manifest.train.front().height();
  const std::size_t w = manifest.train.front().width();
  if (cfg.loss == LossKind::Ssim && cfg.window > std::min(h, w)) {
    throw ConfigError("SSIM window larger than the images");
  }

  NetworkParams params;
  AdamState adam;
  EarlyStop stop;
  std::size_t epoch = 0;
  if (resume) {
    if (!resume->adam) {
      throw ConfigError("cannot resume: checkpoint carries no optimizer state");
    }
    params = resume->params;
    adam = *resume->adam;
    stop = resume->early_stop;
    epoch = resume->epoch;
    if (params.input_size() != n_signal || params.output_size() != n_signal) {
      throw DimensionError("resumed network does not match the image size");
    }
  } else {
    params = init_params(cfg.arch, derive_seed(cfg.seed, "init"));
    stop.patience = cfg.patience;
  }
  adam.hyper.learning_rate = cfg.learning_rate;

  std::vector<ReferenceMoments> reference;
  if (cfg.cache_reference_stats && cfg.loss == LossKind::Ssim) {
    reference.resize(manifest.train.size());
    parallel_for(manifest.train.size(), cfg.threads, [&](std::size_t i) {
      reference[i] = reference_moments(extract_patches(manifest.train[i], cfg.window));
    });
  }

  const bool monitor_validation =
      cfg.monitor == MonitorKind::Validation && !manifest.validation.empty();
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  auto snapshot = [&](std::size_t at_epoch) {
    Checkpoint c;
    c.arch = cfg.arch;
    c.params = params;
    c.adam = adam;
    c.early_stop = stop;
    c.epoch = at_epoch;
    c.config = cfg.to_key_values();
    return c;
  };
  result.best = snapshot(epoch);

  std::vector<std::size_t> order(manifest.train.size());
  const std::size_t first_epoch = epoch + 1;
  for (epoch = first_epoch; epoch < first_epoch + cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto members = std::span<const std::size_t>(order).subspan(begin, end - begin);
      std::vector<const ReferenceMoments*> cached;
      if (!reference.empty()) {
        for (std::size_t i : members) {
          cached.push_back(&reference[i]);
        }
      }
      const Eigen::MatrixXd x = gather(manifest.train, members);
      double batch_mean = 0.0;
      try {
        batch_mean = train_step(params, adam, x, h, w, cfg, cached);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      epoch_total += batch_mean * static_cast<double>(end - begin);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_total / static_cast<double>(order.size());
    if (!manifest.validation.empty()) {
      entry.validation_loss = mean_loss(params, manifest.validation, cfg);
    }
    if (!cfg.reproducible) {
      entry.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.push_back(entry);
    if (on_epoch) {
      on_epoch(entry);
    }

    const double monitored = monitor_validation ? *entry.validation_loss : entry.train_loss;
    const StopDecision decision = observe_epoch(stop, monitored);
    if (stop.epochs_since_improvement == 0) {
      result.best = snapshot(epoch);
    }
    result.epochs_run += 1;
    if (decision == StopDecision::Stop) {
      result.reason = StopReason::Patience;
      break;
    }
  }
  return result;
}

EvalReport evaluate(const NetworkParams& params, const std::vector<Image>& images,
                    std::size_t window, WeightKind weighting, std::size_t threads) {
  EvalReport report;
  if (images.empty()) {
    return report;
  }
  if (params.output_size() != params.input_size()) {
    throw DimensionError("evaluate: network output size differs from its input size");
  }
  check_images(images, params.input_size(), "evaluation");
  const std::size_t h = images.front().height();
  const std::size_t w = images.front().width();
  report.ssim.resize(images.size());
  report.mse.resize(images.size());

  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const std::size_t end = std::min(images.size(), begin + kChunk);
    const Eigen::MatrixXd x = gather(images, std::span(idx).subspan(begin, end - begin));
    const Eigen::MatrixXd y_hat = forward_batch(params, x);
    parallel_for(end - begin, threads, [&](std::size_t j) {
      const auto col = static_cast<Eigen::Index>(j);
      const Image recon = unflatten(y_hat.col(col), h, w);
      report.ssim[begin + j] = ssim_image(images[begin + j], recon, window, weighting);
      report.mse[begin + j] = mse_loss_and_grad(x.col(col), y_hat.col(col)).loss;
    });
  }
  const double n = static_cast<double>(images.size());
  report.mean_ssim = std::accumulate(report.ssim.begin(), report.ssim.end(), 0.0) / n;
  report.mean_mse = std::accumulate(report.mse.begin(), report.mse.end(), 0.0) / n;
  return report;
}

void write_eval_report(std::ostream& out, const EvalReport& report, const KeyValues& context) {
  for (const auto& [k, v] : context) {
    out << k << ' ' << v << '\n';
  }
  out << "images " << report.ssim.size() << '\n';
  out << std::fixed << std::setprecision(6);
  out << "ssim_score " << report.mean_ssim << '\n';
  out << "mse_score " << report.mean_mse << '\n';
  out.unsetf(std::ios::floatfield);
}

Image reconstruct(const NetworkParams& params, const Image& image) {
  if (image.size() != params.input_size() || params.output_size() != image.size()) {
    throw DimensionError("reconstruct: image has " + std::to_string(image.size()) +
                         " pixels, network maps " + std::to_string(params.input_size()) +
                         " -> " + std::to_string(params.output_size()));
  }
  const auto [y_hat, cache] = forward(params, flatten(image));
  return unflatten(y_hat, image.height(), image.width());
}

}  // namespace cssim
