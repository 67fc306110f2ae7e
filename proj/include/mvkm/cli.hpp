#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvkm::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kData = 5,
  kTraining = 6,
};

/// Runs one `mvkm` invocation. `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace mvkm::cli
