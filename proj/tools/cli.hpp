#pragma once

#include <string>
#include <vector>

namespace leaflite::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitFormat = 4;
inline constexpr int kExitNumeric = 5;
inline constexpr int kExitShape = 6;

// args[0] is the program name. Messages go to stdout/stderr.
int run(const std::vector<std::string>& args);

}  // namespace leaflite::cli
