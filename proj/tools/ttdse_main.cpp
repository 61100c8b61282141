#include <iostream>

#include "ttdse/cli.hpp"

int main(int argc, char** argv) {
    return ttdse::cli::run(argc, argv, std::cout, std::cerr);
}
