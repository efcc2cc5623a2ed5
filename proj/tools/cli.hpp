#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace otdl::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kConfig = 4 };

/// Runs the command line tool. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace otdl::cli
