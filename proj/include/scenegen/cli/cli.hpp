#pragma once

#include <string>
#include <vector>

namespace scenegen {

// Parses argv and runs one subcommand; returns the process exit code.
// Config validation failures exit nonzero with a field-level diagnostic.
int run_cli(int argc, const char* const* argv);

// Convenience overload for in-process callers (tests); args exclude argv[0].
int run_cli(const std::vector<std::string>& args);

// Worker count from SCENEGEN_WORKERS (the only environment knob), default 1.
int worker_count();

}  // namespace scenegen
