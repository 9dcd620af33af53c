#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fatality::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

// Runs the command line (args excludes the program name) and returns the
// process exit code. All output goes to the given streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fatality::cli
