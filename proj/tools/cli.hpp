#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfaimd::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kNumerical = 1,      ///< non-finite state or NaN load
  kConfig = 2,         ///< model rejected or bad argument value
  kNotConverged = 3,   ///< outputs are still written
  kInfiniteMass = 4,
  kUsage = 64,
};

/// Entry point of the `mfaimd` tool; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfaimd::cli
