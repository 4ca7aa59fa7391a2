#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "cssim/errors.hpp"
#include "cssim/trainer.hpp"

namespace cssim {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Raised for --help; what() holds the help text.
class HelpRequested : public UsageError {
 public:
  using UsageError::UsageError;
};

/// Environment variable consulted when --data-dir is not given.
inline constexpr const char* kDataDirEnv = "CSSIM_DATA_DIR";

enum class Command { Train, Eval, Reconstruct, GradCheck, ExportPhi };

struct CommandSpec {
  Command command = Command::Train;
  TrainConfig train;  // also carries data paths, seed, window, threads for other commands
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> resume;
  std::filesystem::path output;  // export-phi target file
  std::size_t reconstruct_count = 2;
  std::size_t gradcheck_pairs = 100;
};

/// Parses argv (argv[0] is the program name). Flags given explicitly win over
/// values read from --config. Throws UsageError.
CommandSpec parse_args(int argc, const char* const* argv);

/// Executes a parsed command. Returns the process exit status.
int run(const CommandSpec& spec, std::ostream& out, std::ostream& err);

/// parse_args + run with error reporting; 2 on usage errors, 1 on failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cssim
