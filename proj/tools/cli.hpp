#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace procguard {

// Entry point shared by main() and the tests. Returns the process exit code:
// 0 ok, 2 bad configuration, 3 missing or invalid input, 4 sampler failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace procguard
