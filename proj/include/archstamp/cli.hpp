#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace archstamp {

// Exit codes shared by the CLI and the pipeline tests.
inline constexpr int kExitVerified = 0;
inline constexpr int kExitNotVerified = 1;
inline constexpr int kExitNotNas = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;

// Dispatches one CLI invocation. argv excludes the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace archstamp
