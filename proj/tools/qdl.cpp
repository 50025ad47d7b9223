#include <iostream>
#include <string>
#include <vector>

#include "qdl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qdl::cli::run(args, std::cout, std::cerr);
}
