#pragma once

#include <iosfwd>

namespace binconv {

// Entry point of the `binconv` tool. Returns the process exit status:
// 0 on success, 1 on a runtime failure, 2 on invalid usage or configuration.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace binconv
