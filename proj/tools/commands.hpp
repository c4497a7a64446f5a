#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace starparadox::cli {

// Exit codes.
inline constexpr int k_exit_ok = 0;
inline constexpr int k_exit_validation = 2;
inline constexpr int k_exit_runtime = 3;

// Environment variable consulted for the default --seed.
inline constexpr const char* k_seed_env = "STARPARADOX_SEED";

// Runs one command line (arguments after the program name).  Standard output goes to `out`,
// diagnostics to `err`; returns the exit code.
auto run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) -> int;

}  // namespace starparadox::cli
