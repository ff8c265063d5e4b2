#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ifg::cli {

/// 1 covers I/O and otherwise unexpected failures.
enum ExitCode : int { ok = 0, io_failure = 1, config_error = 2, numeric_failure = 3, acceptance_failure = 4 };

/// Runs the command line `args` (program name excluded).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ifg::cli
