#pragma once

#include <iosfwd>

namespace ctc::cli {

enum ExitCode { kOk = 0, kConfigError = 1, kIoError = 2, kNumericalError = 3 };

/// Entry point of the `ctc` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctc::cli
