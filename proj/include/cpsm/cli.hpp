#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpsm::cli {

/// Runs the `cpsm` command line (args exclude the program name) and returns
/// the process exit code: 0 success, 2 validation error, 3 numerical
/// failure, 4 I/O error.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace cpsm::cli
