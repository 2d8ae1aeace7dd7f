#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace miniomp {

/// Exit statuses of the mini-omp command.
enum ExitStatus : int {
  kExitOk = 0,
  kExitDiagnostics = 1,
  kExitUsage = 2,
  kExitTrap = 3,
};

/// Run the mini-omp command line. `args` excludes the program name.
/// Program and report output go to `out`; diagnostics, traps and usage
/// errors go to `err`.
int execute_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace miniomp
