#pragma once

#include <ostream>

#include "euph/error.hpp"

namespace euph::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBackend = 3;

int exit_code(ErrorKind kind);

// Entry point of the `euph` tool. Results go to `out`, progress and errors to
// `err`. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace euph::cli
