#include <iostream>

#include "voxsr/cli.hpp"

int main(int argc, char** argv) { return voxsr::cli::run(argc, argv, std::cout, std::cerr); }
