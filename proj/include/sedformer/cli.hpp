#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sed {

// Entry point of the sedformer tool. `args` excludes the program name.
// Returns 0 on success, 2 on usage, config or data errors, 1 otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sed
