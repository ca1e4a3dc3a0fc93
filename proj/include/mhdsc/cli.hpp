#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mhdsc {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_validation = 2, exit_numerical = 3 };

/// Runs one command line (args excludes the program name). Normal output goes
/// to `out`, diagnostics to `err`; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mhdsc
