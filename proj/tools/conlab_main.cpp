#include <iostream>

#include "conlab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return conlab::run_cli(args, std::cout, std::cerr);
}
