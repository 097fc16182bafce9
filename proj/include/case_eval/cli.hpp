#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace case_eval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Subcommands: evaluate, compare, analyze, curate, guide, report.
// `args` excludes the program name. Settings resolve as
//   --config file  <  CASE_EVAL_<FLAG> environment variables  <  flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace case_eval::cli
