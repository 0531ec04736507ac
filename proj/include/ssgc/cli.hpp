#pragma once
// Command-line entry point (implemented in src/cli.cpp).

#include <iostream>
#include <ostream>

namespace ssgc {

/// Parses argv and runs one subcommand. Returns the process exit code:
/// 0 success, 1 usage or input error, 2 training diverged, 3 verification failed.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace ssgc
