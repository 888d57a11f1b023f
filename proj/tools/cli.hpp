#pragma once

#include <iosfwd>

namespace guttation::cli {

enum ExitCode : int {
    kOk = 0,
    kAnalysisFailed = 1,
    kBadInput = 2,
    kServiceError = 3,
};

/// Entry point of the `guttation` binary; writes to the given streams
/// instead of stdout/stderr so commands can be exercised in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace guttation::cli
