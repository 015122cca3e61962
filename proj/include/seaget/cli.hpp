#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seaget {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // bad flags, unreadable or malformed input
inline constexpr int kExitNumerical = 3;  // training diverged

/// Runs one `seaget` subcommand. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seaget
