#include <iostream>

#include "avgtrack/cli.hpp"

int main(int argc, char** argv) { return avgtrack::run_cli(argc, argv, std::cout, std::cerr); }
