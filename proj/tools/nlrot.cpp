#include <iostream>

#include "nlrot/harness/cli.hpp"

int main(int argc, char** argv) { return nlrot::run_cli(argc, argv, std::cout, std::cerr); }
