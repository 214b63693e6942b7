#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "overscale/errors.hpp"

namespace overscale::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_numerical = 3,
};

struct CommandOutcome {
    int exit_code = exit_ok;
    std::vector<std::string> artifacts;
    std::string summary;
};

int exit_code_for(ErrorKind kind) noexcept;

/// Runs one command line (without the program name). Numeric results go to
/// `out` as JSON; diagnostics and summaries go to `err`.
CommandOutcome run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace overscale::cli
