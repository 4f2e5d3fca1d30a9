#include "robustmm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return robustmm::run_cli(argc, argv, std::cout, std::cerr); }
