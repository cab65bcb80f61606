#pragma once

#include <string>
#include <vector>

namespace agfn::cli {

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 usage/config error, 2 data error, 3 numerical failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace agfn::cli
