#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eppo {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitEvaluatorError = 3,
};

/// Entry point behind the `eppo` binary. args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eppo
