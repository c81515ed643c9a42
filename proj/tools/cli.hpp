#pragma once

#include <ostream>

namespace heloc::cli {

/// Exit codes shared by every command.
enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kNoSignal = 3,
  kMismatch = 4,
};

/// Runs one `heloc` command line. Diagnostics go to `err`, summaries to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace heloc::cli
