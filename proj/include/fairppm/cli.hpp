#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fairppm::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kMissingArtifact = 3,
  kUndefinedMetric = 4,
};

// Runs one `fairppm` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairppm::cli
