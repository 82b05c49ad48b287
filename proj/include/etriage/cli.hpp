#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace etriage::cli {

enum ExitCode : int {
  kSuccess = 0,
  kRuntimeError = 1,
  kUsageError = 2,
  kAssertionFailure = 3,
};

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace etriage::cli
