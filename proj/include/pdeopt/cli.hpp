#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdeopt {

// Runs one subcommand invocation (argv without the program name) and writes
// its artifacts under the resolved output directory. The directory comes
// from --output when given, else the OUTPUT_DIR environment variable, else
// the config. Returns 0 on success, 1 on a usage error, 2 on a config
// problem and 3 on a solver failure.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace pdeopt
