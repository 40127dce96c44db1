#include <iostream>

#include "nlarm/cli.hpp"

int main(int argc, char** argv) { return nlarm::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
