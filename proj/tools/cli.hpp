#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cspt::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

/// Evenly spaced values from "min:max:count", endpoints included.
std::vector<double> parse_rho_grid(const std::string& text);

/// Integers from "start:step:stop", stop included when reached.
std::vector<int> parse_n_list(const std::string& text);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cspt::cli
