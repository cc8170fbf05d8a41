#include <iostream>

#include "iburd/cli.hpp"

int main(int argc, char** argv) { return iburd::run_cli(argc, argv, std::cout, std::cerr); }
