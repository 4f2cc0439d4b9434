#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "conlab/error.hpp"

namespace conlab {

/// Process exit status for each outcome.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitInvalidArgument = 3,
    kExitInvalidConfig = 4,
    kExitIo = 5,
    kExitFormat = 6,
    kExitCycle = 7,
    kExitNotFound = 8,
    kExitNumerical = 9,
};

int exit_code(Error::Kind kind);

/// Runs one subcommand. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conlab
