#pragma once

#include <ostream>
#include <span>
#include <string>

namespace sneurod {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

/// Runs one subcommand (synth, preprocess, train, eval, explain). `args`
/// excludes the program name. Diagnostics go to `err` as a single line.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sneurod
