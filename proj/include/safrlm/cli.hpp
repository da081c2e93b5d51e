#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace safrlm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Subcommands: generate, train, eval, sweep-blocks, gradcheck.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace safrlm
