#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lmc/config.hpp"

namespace lmc::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,  // bad flags, invalid configuration, incompatible checkpoint
  kIo = 3,
  kNumerical = 4,
};

// Entry point of the lmc-predict tool. Diagnostics go to `err` as a single
// line; progress goes to `out`.
int run(const std::vector<std::string>& args, const Environment& env, std::ostream& out,
        std::ostream& err);

}  // namespace lmc::cli
