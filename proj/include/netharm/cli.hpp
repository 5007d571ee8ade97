#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netharm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

// Runs the command line front end; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace netharm::cli
