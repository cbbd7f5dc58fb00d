#pragma once

#include <iosfwd>

namespace isg {

/// Entry point of the isg tool. Subcommands: solve, bottlenecks, experiment,
/// query-session. Returns the process exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace isg
