#pragma once

#include <iosfwd>
#include <string_view>

#include "dar/error.hpp"

namespace dar::cli {

/// Process exit codes.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMalformedInput = 3,
  kInvalidModel = 4,
  kUnknownScenario = 5,
  kNumeric = 6,
};

int exit_code_for(ErrorCode code) noexcept;

/// Runs the `dar` command line. Errors are reported on err as a single line
///   error: code=<name> message="<text>"
/// and mapped to the exit codes above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dar::cli
