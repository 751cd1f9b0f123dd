#pragma once

// Experiment runner: every verification and simulation as a subcommand, configured by
// JSON files and flags, writing meta.json plus long-format CSV artifacts.

#include <iosfwd>
#include <string>
#include <vector>

namespace nhdnls::cli {

enum ExitCode : int { kOk = 0, kToleranceFailure = 1, kInvalidConfig = 2, kNumericalBlowup = 3 };

std::string version();

/// Runs one invocation; `args` excludes the program name. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nhdnls::cli
