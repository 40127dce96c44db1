#pragma once

#include <iosfwd>

namespace nlarm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Entry point behind the `nlarm` executable. Subcommands: fk, ik, repl,
/// serve, eval-intents, reproduce-stats, pick-demo, bench.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace nlarm::cli
