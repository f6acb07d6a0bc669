#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rme::cli {

/// Runs one subcommand (gen, sample, solve, eval, analyze, bench, render).
/// `args` excludes the program name. Errors go to `err` and yield a nonzero
/// exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count for bench: RME_THREADS if set, else the hardware count.
unsigned thread_budget();

}  // namespace rme::cli
