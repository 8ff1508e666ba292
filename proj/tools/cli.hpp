#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rprop::cli {

enum ExitCode { kOk = 0, kVerificationFailed = 1, kUsage = 2 };

// Entry point shared by the binary and the tests. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// --jobs default: REASON_PROP_JOBS when set to a positive integer, else 1.
unsigned default_jobs();

}  // namespace rprop::cli
