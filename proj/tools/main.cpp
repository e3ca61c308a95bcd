#include <iostream>

#include "saltgov/cli.hpp"

int main(int argc, char** argv) { return saltgov::run_cli(argc, argv, std::cout, std::cerr); }
