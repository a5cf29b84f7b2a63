#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace freshsched {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2, kExitIo = 3 };

/// Runs one CLI invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freshsched
