#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sherlock::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point behind the `sherlock` binary. `args` excludes the program
/// name. Subcommands: build-vocab, train, eval, scan, serve, stats.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sherlock::cli
