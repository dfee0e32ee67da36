#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geomflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command line; output goes to `out` unless --out names a file. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies GEOMFLOW_LOG (error|warn|info|debug) to the default logger.
void configure_logging();

}  // namespace geomflow::cli
