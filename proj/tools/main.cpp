#include "gcopula/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gcopula::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
