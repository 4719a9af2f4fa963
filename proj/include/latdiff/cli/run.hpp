#pragma once

#include <string>
#include <vector>

namespace latdiff {

// Dispatches a full command line (argv[0] included). Exit codes: 0 success,
// 1 usage error (message on stderr), 2 runtime failure (structured
// "error: <kind>: <message>" line on stderr). Every run echoes its resolved
// config before doing work.
int run(const std::vector<std::string>& argv);

}  // namespace latdiff
