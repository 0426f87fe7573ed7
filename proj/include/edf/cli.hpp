#pragma once

#include <string>
#include <vector>

namespace edf::cli {

/// Exit codes: 0 success, 1 invalid flags, configuration or input data, 2 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitRuntime = 2;

int run(int argc, char** argv);
/// args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace edf::cli
