#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmcst::cli {

enum Exit : int { kPass = 0, kViolation = 1, kUsage = 2, kStateCap = 3 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hmcst::cli
