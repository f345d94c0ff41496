// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace svo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the svodrive command. Errors are reported as a single line on `err`:
///   error kind=<category> message="<text>"
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svo::cli
