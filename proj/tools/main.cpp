#include <iostream>

#include "crimecast/cli.hpp"

int main(int argc, char** argv) {
    return crimecast::run_cli(argc, argv, std::cout, std::cerr);
}
