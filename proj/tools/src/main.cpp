#include <iostream>

#include "ctap_cli/cli.hpp"

int main(int argc, char** argv) { return ctap::cli::run(argc, argv, std::cout, std::cerr); }
