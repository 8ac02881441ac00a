#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsrds {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitResource = 3;
inline constexpr int kExitInconclusive = 4;

// Entry point of the nonstat-rds tool; args excludes the program name.
// Diagnostics go to `err`, short summaries to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsrds
