#include <iostream>

#include "archmap/cli.hpp"

int main(int argc, char **argv) {
    return archmap::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
