#pragma once

#include <string>
#include <vector>

namespace powertrace {

// Entry point behind the `powertrace` binary. Returns 0 on success, 1 on
// user/config errors (single-line diagnostic on stderr), 2 on internal
// errors. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

} // namespace powertrace
