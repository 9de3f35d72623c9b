#pragma once

#include <iosfwd>

namespace crimecast {

// Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 bad usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitUsage = 64;

// Full command-line surface; streams injected so tests can capture output.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crimecast
