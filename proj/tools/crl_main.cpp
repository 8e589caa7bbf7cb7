#include <iostream>

#include "crl/cli/commands.hpp"

int main(int argc, char** argv) { return crl::cli::run_cli(argc, argv, std::cout, std::cerr); }
