#include <iostream>

#include "mchr/cli.hpp"

int main(int argc, char** argv) { return mchr::cli_main(argc, argv, std::cout, std::cerr); }
