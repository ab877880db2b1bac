#include <iostream>

#include "dgtime/cli.hpp"

int main(int argc, char** argv) { return dgtime::run_cli(argc, argv, std::cout, std::cerr); }
