#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace synseg::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

// Runs the `synseg` command line. args[0] is the program name. Results go
// to `out`, diagnostics and the effective-config echo to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Expands `--config FILE` into "--key=value" arguments placed before the
// remaining arguments of the subcommand, so explicit flags win.
std::vector<std::string> ExpandConfig(const std::vector<std::string>& args);

}  // namespace synseg::cli
