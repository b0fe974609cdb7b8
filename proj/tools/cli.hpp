#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dyttp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitCheckpointMismatch = 4;

/// Runs one `dyttp` invocation. `args` excludes the program name; normal
/// output goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dyttp::cli
