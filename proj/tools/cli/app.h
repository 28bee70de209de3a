#pragma once

#include "ierf/error.h"

namespace ierf::cli {

// 1 for configuration and range errors, 3 for numerical failures, 2 for the
// other data and validation errors.
int exit_code(ErrorKind kind);

// Parses arguments, runs one subcommand and returns the process exit code:
// 0 success, 1 usage, 2 data or validation failure, 3 numerical failure.
// Failures print a single JSON line to stderr:
//   {"command":..., "error":<kind>, "exit":<code>, "message":...}
int run(int argc, const char* const* argv);

}  // namespace ierf::cli
