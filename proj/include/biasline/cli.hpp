#pragma once

#include <iosfwd>

namespace biasline {

/// Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 auth failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAuth = 3;

/// Entry point for the `biasline` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biasline
