#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mhc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kIoError = 3,
    kNumericalError = 4,
};

// Entry point shared by the `mhc` binary and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mhc::cli
