#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace texforge {

// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace texforge
