#pragma once

#include <iosfwd>

namespace tiertrack {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitBadInput = 2;

/// Subcommands: track, eval, infer, synth. Returns kExitOk, kExitUsage on a
/// command-line error, or kExitBadInput on unreadable or malformed input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tiertrack
