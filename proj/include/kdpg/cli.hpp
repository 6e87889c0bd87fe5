#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kdpg {

inline constexpr const char* kVersion = "kdpg 0.1.0";

/// Exit statuses of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one subcommand: gen-corpus, train-base, tune, evaluate, sample,
/// enumerate-exact or report. `args` excludes the program name. Progress
/// goes to `log`; errors are reported there too and mapped to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& log);

}  // namespace kdpg
