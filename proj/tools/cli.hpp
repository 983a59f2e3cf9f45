#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace peeler {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

/// Runs one `peeler` invocation; args exclude the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peeler
