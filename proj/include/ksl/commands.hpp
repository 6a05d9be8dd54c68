#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ksl/config.hpp"
#include "ksl/error.hpp"
#include "ksl/scenarios.hpp"

namespace ksl {

inline constexpr const char* kVersion = "0.1.0";

// Exit statuses of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_validation = 2,  // unreadable or invalid input, including bad configs
  exit_numerical = 3,   // computation diverged or left its regime
  exit_io = 4
};

int exit_code_for(ErrorKind kind);

const std::vector<std::string>& command_names();

struct CommandLine {
  std::string command;
  std::string figure;  // reproduce only
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string cache_dir;
};

// Builds the materialized config for a command line: the --config file (or
// the bundled config for reproduce, overlaid with the file's keys), with the
// command name and any --seed override applied.
RunConfig resolve_config(const CommandLine& cl);

// Runs one command and returns its artifacts without touching the output
// directory (decomposition caches aside).
Artifacts execute(const std::string& command, const RunConfig& config, const std::string& cache_dir);

// Writes config.json, the artifacts and manifest.json into dir.
void write_outputs(const std::string& dir, const std::string& command, const RunConfig& config,
                   const Artifacts& artifacts);

// Whole pipeline with error reporting; returns the exit status.
int run_command_line(const CommandLine& cl, std::ostream& log);

}  // namespace ksl
