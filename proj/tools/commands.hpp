#pragma once

#include <iosfwd>

namespace constel::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kTooFewPoints = 2,
  kInsufficientMatches = 3,
};

/// Runs the tool with argv-style arguments (argv[0] is the program name).
/// Normal output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace constel::cli
