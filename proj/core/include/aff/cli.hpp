#pragma once

#include <string>
#include <vector>

namespace aff {

/// Command-line entry point. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on validation or
/// gradient-check failures.
int run_cli(std::vector<std::string> args);

}  // namespace aff
