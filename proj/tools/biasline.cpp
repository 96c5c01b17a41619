#include <iostream>

#include "biasline/cli.hpp"

int main(int argc, char** argv) { return biasline::run_cli(argc, argv, std::cout, std::cerr); }
