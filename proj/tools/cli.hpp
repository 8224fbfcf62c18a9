#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace oudiff::cli {

// Exit codes: 0 ok, 2 invalid config, 3 unstable model, 4 I/O failure.
enum ExitCode : int { ok = 0, internal = 1, invalid_config = 2, unstable = 3, io_failure = 4 };

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oudiff::cli
