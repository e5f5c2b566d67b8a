#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fspn::cli {

enum ExitCode { kOk = 0, kUsage = 1, kFailure = 2 };

/// Runs one subcommand. `args` excludes the program name. Results go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fspn::cli
