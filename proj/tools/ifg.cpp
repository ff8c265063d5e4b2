#include <iostream>

#include "ifg/cli.hpp"

int main(int argc, char** argv) {
    return ifg::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
