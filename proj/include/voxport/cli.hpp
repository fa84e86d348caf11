#pragma once

#include <iosfwd>

namespace voxport {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Entry point for `voxport <subcommand> ...`: tile, sample-bench, gt-gen,
/// train, predict, eval, gen-scene.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace voxport
