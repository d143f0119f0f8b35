#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "quasidiag/config.hpp"

namespace quasidiag {

enum ExitCode : int { kExitPass = 0, kExitConfig = 2, kExitRegime = 3, kExitMonitor = 4 };

struct CommandOutcome {
  int exit_code = kExitPass;
  nlohmann::json manifest;
};

CommandOutcome cmd_diagonalize(const RunConfig& c);
CommandOutcome cmd_verify(const RunConfig& c);
CommandOutcome cmd_spectrum(const RunConfig& c);

struct CliOptions {
  std::string command;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

// loads the config, runs the command, maps errors to exit codes; the manifest goes last
int run_command(const CliOptions& opt);

void init_logging();

}  // namespace quasidiag
