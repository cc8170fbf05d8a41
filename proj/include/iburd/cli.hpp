#pragma once

#include <ostream>

namespace iburd {

/// Entry point of the `iburd` command. Returns 0 on success, 1 on usage
/// errors and 2 when the command itself fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iburd
