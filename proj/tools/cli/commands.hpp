// The evuq command-line surface.
//
// Exit codes: 0 success, 2 usage (bad flags, config or request), 3 I/O,
// 4 training divergence, 5 malformed checkpoint or data artifact.
#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace evuq::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitDivergence = 4,
  kExitFormat = 5,
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one command line (args[0] is the program name) and returns its exit
/// code. Normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "a,b,c" -> {a, b, c}; throws UsageError on malformed numbers.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace evuq::cli
