#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqslu {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Entry point of the `seqslu` executable. `args` includes the program name.
// Subcommands: gen-data, train, decode, eval, gradcheck, params, validate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqslu
