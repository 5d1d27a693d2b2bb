#include <iostream>

#include "coopdock/cli.hpp"

int main(int argc, char** argv) { return coopdock::run_cli(argc, argv, std::cout, std::cerr); }
