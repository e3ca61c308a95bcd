#pragma once

#include <iosfwd>

namespace saltgov {

enum ExitCode { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitEmptySlice = 3 };

// Subcommands: simulate, identify, govern, moas-export, compare.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace saltgov
