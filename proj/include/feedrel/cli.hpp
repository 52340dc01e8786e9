#pragma once

#include <iosfwd>

namespace feedrel {

/// Exit codes: 0 success, 1 a check failed, 2 usage or input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the command-line tool. Output documents go to --out when
/// given, otherwise to `out`; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace feedrel
