#include "cssim/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cssim/checkpoint.hpp"
#include "cssim/dataset.hpp"
#include "cssim/gradcheck.hpp"
#include "cssim/seeds.hpp"

namespace cssim {

namespace {

struct RawOptions {
  std::string data_dir;
  double rate = 0.125;
  std::size_t width_factor = 2;
  std::size_t depth = 1;
  std::string loss = "ssim";
  std::string weighting = "log";
  std::string eval_weighting = "uniform";
  std::string output_activation = "sigmoid";
  std::string monitor = "validation";
  std::size_t window = kDefaultWindow;
  double lr = 5e-4;
  std::size_t batch_size = 128;
  std::size_t patience = 50;
  std::size_t max_epochs = 2000;
  std::uint64_t seed = 0;
  std::size_t subset_train = 0;
  std::size_t subset_test = 0;
  double val_fraction = 0.05;
  std::string out_dir = ".";
  bool reproducible = false;
  bool cache_reference_stats = false;
  std::size_t threads = 1;
  std::string checkpoint;
  std::string resume;
  std::string output;
  std::size_t count = 2;
  std::size_t pairs = 100;
  std::string config;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Turns each "key = value" line into "--key=value".
std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot read config file " + path);
  }
  std::vector<std::string> args;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty() || key == "config") {
      throw UsageError(path + ":" + std::to_string(line_no) + ": invalid key");
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Splices config-file arguments in front of the explicit ones so that the
// explicit flags, parsed last, win.
std::vector<std::string> expand_config(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> explicit_args;
  std::vector<std::string> from_file;
  std::size_t first = std::min<std::size_t>(args.size(), 2);
  for (std::size_t i = first; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a path");
      from_file = read_config_file(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      from_file = read_config_file(args[i].substr(9));
    } else {
      explicit_args.push_back(args[i]);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(first));
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), explicit_args.begin(), explicit_args.end());
  return out;
}

const CLI::Validator kLossNames = CLI::IsMember({"ssim", "mse"});
const CLI::Validator kWeightNames = CLI::IsMember({"uniform", "log"});

void add_data_options(CLI::App* cmd, RawOptions& o, bool required) {
  auto* opt = cmd->add_option("--data-dir", o.data_dir, "CIFAR-10 binary batch directory")
                  ->envname(kDataDirEnv);
  if (required) {
    opt->required();
  }
  cmd->add_option("--subset-test", o.subset_test, "Use only the first K test images");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--window", o.window, "SSIM window side")->check(CLI::Range(2, 1 << 20));
}

CLI::App* add_train(CLI::App& app, RawOptions& o) {
  auto* cmd = app.add_subcommand("train", "Jointly train the sensing matrix and the reconstruction network");
  add_data_options(cmd, o, true);
  cmd->add_option("--rate", o.rate, "Sensing rate R = M/N, 0 < R < 1")
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            double r = 0.0;
            try {
              r = std::stod(s);
            } catch (...) {
              return "rate must be a number";
            }
            return (r > 0.0 && r < 1.0) ? std::string{} : "rate must satisfy 0 < R < 1";
          },
          "(0,1)"));
  cmd->add_option("--width-factor", o.width_factor, "Hidden width factor B")
      ->check(CLI::IsMember({1, 2}));
  cmd->add_option("--depth", o.depth, "Reconstruction layers K")->check(CLI::PositiveNumber);
  cmd->add_option("--loss", o.loss, "Training loss")->check(kLossNames);
  cmd->add_option("--weighting", o.weighting, "SSIM window weighting for training")
      ->check(kWeightNames);
  cmd->add_option("--eval-weighting", o.eval_weighting, "SSIM weighting for reported scores")
      ->check(kWeightNames);
  cmd->add_option("--output-activation", o.output_activation, "Output layer activation")
      ->check(CLI::IsMember({"sigmoid", "linear"}));
  cmd->add_option("--monitor", o.monitor, "Loss watched by the stopping rule")
      ->check(CLI::IsMember({"validation", "train"}));
  cmd->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--patience", o.patience, "Epochs without a new minimum before stopping")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs", o.max_epochs, "Hard epoch cap")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master seed (init, shuffle and split derive from it)");
  cmd->add_option("--subset-train", o.subset_train, "Use only the first K training images");
  cmd->add_option("--val-fraction", o.val_fraction, "Validation share of raw training images")
      ->check(CLI::Range(0.0, 0.999999));
  cmd->add_option("--out-dir", o.out_dir, "Directory for checkpoint, log and report");
  cmd->add_option("--resume", o.resume, "Continue from a checkpoint with optimizer state");
  cmd->add_flag("--reproducible", o.reproducible, "Write zero elapsed times so logs are byte-stable");
  cmd->add_flag("--cache-reference-stats", o.cache_reference_stats,
                "Precompute window mean/variance of training images");
  return cmd;
}

TrainConfig to_config(const RawOptions& o) {
  TrainConfig cfg;
  cfg.arch.rate = o.rate;
  cfg.arch.width_factor = o.width_factor;
  cfg.arch.depth = o.depth;
  cfg.arch.output_activation = parse_activation_kind(o.output_activation);
  cfg.loss = parse_loss_kind(o.loss);
  cfg.weighting = parse_weight_kind(o.weighting);
  cfg.eval_weighting = parse_weight_kind(o.eval_weighting);
  cfg.monitor = parse_monitor_kind(o.monitor);
  cfg.window = o.window;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.patience = o.patience;
  cfg.max_epochs = o.max_epochs;
  cfg.seed = o.seed;
  cfg.reproducible = o.reproducible;
  cfg.cache_reference_stats = o.cache_reference_stats;
  cfg.threads = o.threads;
  cfg.data_dir = o.data_dir;
  if (o.subset_train > 0) cfg.subset_train = o.subset_train;
  if (o.subset_test > 0) cfg.subset_test = o.subset_test;
  cfg.val_fraction = o.val_fraction;
  cfg.out_dir = o.out_dir;
  return cfg;
}

KeyValues checkpoint_context(const Checkpoint& ckpt) {
  KeyValues kv;
  for (const char* key : {"rate", "measurements", "width_factor", "depth", "loss", "weighting"}) {
    for (const auto& [k, v] : ckpt.config) {
      if (k == key) kv.emplace_back(k, v);
    }
  }
  return kv;
}

std::vector<Image> load_test_images(const TrainConfig& cfg) {
  return load_cifar10(cfg.data_dir, Split::Test, cfg.subset_test);
}

int run_train(const CommandSpec& spec, std::ostream& out) {
  TrainConfig cfg = spec.train;
  const auto raw_train = load_cifar10(cfg.data_dir, Split::Train, cfg.subset_train);
  auto test = load_test_images(cfg);
  if (raw_train.empty()) {
    throw ConfigError("no training images found in " + cfg.data_dir.string());
  }
  cfg.arch.signal_length = raw_train.front().size();
  cfg.validate();
  const DatasetManifest manifest =
      make_manifest(raw_train, std::move(test), cfg.val_fraction,
                    derive_seed(cfg.seed, "split"), cfg.data_dir.string());

  std::optional<Checkpoint> resume;
  if (spec.resume) {
    resume = load_checkpoint(*spec.resume);
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir / "train.log");
  if (!log) {
    throw FileError("cannot write " + (cfg.out_dir / "train.log").string());
  }
  log << kLogHeader << '\n';
  out << kLogHeader << '\n';
  const TrainResult result = train(
      cfg, manifest,
      [&](const EpochLog& e) {
        const std::string line = format_log_line(e);
        log << line << '\n' << std::flush;
        out << line << '\n' << std::flush;
      },
      resume ? &*resume : nullptr);

  save_checkpoint(result.best, cfg.out_dir / "checkpoint.txt");
  const EvalReport report = evaluate(result.best.params, manifest.test, cfg.window,
                                     cfg.eval_weighting, cfg.threads);
  KeyValues context = checkpoint_context(result.best);
  context.emplace_back("epochs_run", std::to_string(result.epochs_run));
  context.emplace_back("best_epoch", std::to_string(result.best.epoch));
  context.emplace_back("stop_reason",
                       result.reason == StopReason::Patience ? "patience" : "max_epochs");
  std::ofstream report_file(cfg.out_dir / "eval.txt");
  write_eval_report(report_file, report, context);
  write_eval_report(out, report, context);
  return 0;
}

int run_eval(const CommandSpec& spec, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(spec.checkpoint);
  const auto test = load_test_images(spec.train);
  const EvalReport report = evaluate(ckpt.params, test, spec.train.window,
                                     spec.train.eval_weighting, spec.train.threads);
  write_eval_report(out, report, checkpoint_context(ckpt));
  return 0;
}

int run_reconstruct(const CommandSpec& spec, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(spec.checkpoint);
  const auto test = load_cifar10(spec.train.data_dir, Split::Test, spec.reconstruct_count);
  std::filesystem::create_directories(spec.train.out_dir);
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::ostringstream name;
    name << "recon_" << std::setw(5) << std::setfill('0') << i << ".pgm";
    const auto path = spec.train.out_dir / name.str();
    const Image recon = reconstruct(ckpt.params, test[i]);
    save_pgm(recon, path);
    out << path.string() << ' ' << std::fixed << std::setprecision(6)
        << ssim_image(test[i], recon, spec.train.window) << '\n';
    out.unsetf(std::ios::floatfield);
  }
  return 0;
}

int run_gradcheck(const CommandSpec& spec, std::ostream& out) {
  GradCheckOptions opts;
  opts.seed = spec.train.seed;
  opts.image_pairs = spec.gradcheck_pairs;
  bool all = true;
  for (const GradCheckResult& r : run_gradient_checks(opts)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.suite << " cases=" << r.cases
        << " coords=" << r.coordinates << " worst_rel_err=" << format_real(r.worst_relative_error)
        << " tol=" << format_real(r.tolerance) << '\n';
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

int run_export_phi(const CommandSpec& spec, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(spec.checkpoint);
  const Eigen::MatrixXd phi = extract_sensing_matrix(ckpt.params);
  save_sensing_matrix(phi, spec.output);
  out << spec.output.string() << ' ' << phi.rows() << ' ' << phi.cols() << '\n';
  return 0;
}

}  // namespace

CommandSpec parse_args(int argc, const char* const* argv) {
  CLI::App app{"Learned compressed-sensing operators trained with SSIM or MSE loss", "cssim"};
  app.require_subcommand(1, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RawOptions o;
  auto* train_cmd = add_train(app, o);

  auto* eval_cmd = app.add_subcommand("eval", "Report mean SSIM and MSE over the test set");
  add_data_options(eval_cmd, o, true);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--weighting", o.eval_weighting, "SSIM weighting for the score")
      ->check(kWeightNames);

  auto* recon_cmd = app.add_subcommand("reconstruct", "Write reconstructions of test images as PGM");
  add_data_options(recon_cmd, o, true);
  recon_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  recon_cmd->add_option("--count", o.count, "Number of test images")->check(CLI::PositiveNumber);
  recon_cmd->add_option("--out-dir", o.out_dir, "Output directory");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  grad_cmd->add_option("--seed", o.seed, "Seed for the random test inputs");
  grad_cmd->add_option("--pairs", o.pairs, "Random image pairs per suite")
      ->check(CLI::PositiveNumber);

  auto* phi_cmd = app.add_subcommand("export-phi", "Write the learned sensing matrix");
  phi_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  phi_cmd->add_option("--output", o.output, "Destination tensor file")->required();

  for (auto* sub : {train_cmd, eval_cmd, recon_cmd, grad_cmd, phi_cmd}) {
    sub->add_option("--config", o.config, "Flat 'key = value' file; explicit flags take precedence");
  }

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  CommandSpec spec;
  try {
    spec.train = to_config(o);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  spec.checkpoint = o.checkpoint;
  spec.output = o.output;
  spec.reconstruct_count = o.count;
  spec.gradcheck_pairs = o.pairs;
  if (!o.resume.empty()) spec.resume = o.resume;

  if (train_cmd->parsed()) {
    spec.command = Command::Train;
    try {
      spec.train.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  } else if (eval_cmd->parsed()) {
    spec.command = Command::Eval;
  } else if (recon_cmd->parsed()) {
    spec.command = Command::Reconstruct;
  } else if (grad_cmd->parsed()) {
    spec.command = Command::GradCheck;
  } else {
    spec.command = Command::ExportPhi;
  }
  return spec;
}

int run(const CommandSpec& spec, std::ostream& out, std::ostream& /*err*/) {
  switch (spec.command) {
    case Command::Train:
      return run_train(spec, out);
    case Command::Eval:
      return run_eval(spec, out);
    case Command::Reconstruct:
      return run_reconstruct(spec, out);
    case Command::GradCheck:
      return run_gradcheck(spec, out);
    case Command::ExportPhi:
      return run_export_phi(spec, out);
  }
  return 1;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const CommandSpec spec = parse_args(argc, argv);
    return run(spec, out, err);
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cssim
