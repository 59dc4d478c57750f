#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dtm::cli {

// Exit codes. Everything else that goes wrong maps to kExitFailure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Runs one command; args excludes the program name. Output goes to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtm::cli
