#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shrinknas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // selfcheck found a failing check
inline constexpr int kExitUsage = 2;
inline constexpr int kExitEvaluator = 3;

/// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shrinknas::cli
