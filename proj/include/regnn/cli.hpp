#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace regnn::cli {

/// Runs the command line; args excludes the program name. Returns the exit
/// status: 0 on success, 1 on a failed run or check, 2 on bad usage or config.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace regnn::cli
