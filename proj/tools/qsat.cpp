#include <iostream>

#include "qsat/cli.hpp"

int main(int argc, char** argv) { return qsat::run_cli(argc, argv, std::cout, std::cerr); }
