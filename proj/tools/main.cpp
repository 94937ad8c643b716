#include <iostream>

#include "tiertrack/cli.hpp"

int main(int argc, char** argv) { return tiertrack::run_cli(argc, argv, std::cout, std::cerr); }
