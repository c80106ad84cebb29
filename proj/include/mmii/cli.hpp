#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmii::cli {

inline constexpr const char* kModesSchema = "mmii.modes.v1";
inline constexpr const char* kChainSchema = "mmii.chain.v1";

// Runs one `mmii` command line (args exclude the program name). Returns the
// process exit status; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmii::cli
