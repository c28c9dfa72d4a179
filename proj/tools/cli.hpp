#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpdhf::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitUsage = 2 };

/// Runs the tool on `args` (without the program name). Subcommands:
/// solve, deblur, sweep, validate-steps, selftest.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpdhf::cli
