#include "cpw/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cpw::run_cli(args, std::cout, std::cerr);
}
