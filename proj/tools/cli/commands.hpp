#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace attrevo::cli {

/// Parses argv and runs one subcommand. Returns the process exit code; on
/// failure a JSON object {"error": ..., "message": ...} goes to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attrevo::cli
