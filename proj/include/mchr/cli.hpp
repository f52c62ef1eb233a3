#pragma once

#include <iosfwd>

namespace mchr {

// Exit codes of the mchr tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitIncomplete = 1,
  kExitConfig = 2,
  kExitAdapter = 3,
  kExitIo = 4,
  kExitPortBusy = 5,
};

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mchr
