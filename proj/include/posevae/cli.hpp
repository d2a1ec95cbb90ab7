/// @file
/// Command-line driver. Exit codes: 0 success, 1 usage or configuration
/// error, 2 data error, 3 numeric failure (a diagnostics JSON file is
/// written next to the requested output).
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace posevae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace posevae::cli
