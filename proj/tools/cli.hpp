#pragma once

#include <iosfwd>

namespace orientdet::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

// Entry point of the `orientdet` tool; usable in-process from tests.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace orientdet::cli
