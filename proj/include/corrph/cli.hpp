#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corrph {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation_failed = 1;
inline constexpr int usage = 2;
inline constexpr int bad_model = 3;
inline constexpr int infeasible = 4;
}  // namespace exit_code

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace corrph
