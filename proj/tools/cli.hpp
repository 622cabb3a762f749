#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace subat::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNumericError = 4 };

// Runs one subcommand; returns the process exit code. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace subat::cli
