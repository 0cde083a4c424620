// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scalaw {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 success, 2 usage/config error, 3 data validation
/// error, 4 fit non-convergence. Errors are reported on `err` as one JSON
/// document.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scalaw
