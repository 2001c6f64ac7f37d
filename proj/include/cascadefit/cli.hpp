#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace cascadefit::cli {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitStrictParse = 3;
inline constexpr int kExitFitFailed = 4;
inline constexpr int kExitBulkFailure = 5;

// Runs one subcommand. `args` excludes the program name. Summary lines go to
// `out`, warnings and errors to `err`; the return value is the exit code.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

std::string sha256_hex(std::string_view data);

} // namespace cascadefit::cli
