#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bcsdp::cli {

/// Exit codes of `bcsdp solve`; other subcommands use kOk / kError.
inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kMaxIters = 2;
inline constexpr int kStalled = 3;

/// Runs the command line `args` (without the program name) and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bcsdp::cli
