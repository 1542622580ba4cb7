#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latlm::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kIo = 3,
  kData = 4,
  kModel = 5,
};

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "LATLM_OUTPUT_DIR";

// Runs one subcommand. Metrics go to `out` (the last line is always a single
// key=value), errors to `err` as one `error=<kind> code=<n> message="..."`
// line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace latlm::cli
