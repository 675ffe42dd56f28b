#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace berrysmith {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitInternal = 4,
};

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`; log output follows BERRYSMITH_LOG on stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace berrysmith
