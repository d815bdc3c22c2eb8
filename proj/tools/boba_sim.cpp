#include <iostream>

#include "boba/cli.hpp"

int main(int argc, char** argv) { return boba::run_cli(argc, argv, std::cout, std::cerr); }
