#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sqzcav::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kFitError = 3,
    kIoError = 4,
};

/// Runs one command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqzcav::cli
