#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace metagen::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kRunFailure = 3 };

/// Entry point of the `metagen` tool; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metagen::cli
