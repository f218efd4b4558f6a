#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ceg::cli {

/// Exit codes: 0 success, 1 error, 2 flagged result (degenerate or swapped
/// segment, or no small-intestine frame found).
inline constexpr int kExitFlagged = 2;

/// Runs one command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ceg::cli
