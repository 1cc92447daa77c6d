#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dyadnav {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. Exit codes: 0 success, 1 runtime or data error,
/// 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace dyadnav
