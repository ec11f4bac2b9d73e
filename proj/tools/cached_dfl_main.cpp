#include <iostream>
#include <string>
#include <vector>

#include "cached_dfl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cached_dfl::cli::main(args, std::cout, std::cerr);
}
