#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vivecap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStage = 3;

// Runs one `vivecap <subcommand> ...` invocation in-process. args excludes
// the program name. Failures print a one-line JSON summary on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vivecap::cli
