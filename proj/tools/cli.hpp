#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace udfvault::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kOperational = 2;

/// Runs one command. `args` excludes the program name. Values go to `out`,
/// diagnostics to `err`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace udfvault::cli
