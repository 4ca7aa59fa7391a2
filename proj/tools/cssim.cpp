#include <iostream>

#include "cssim/cli.hpp"

int main(int argc, char** argv) { return cssim::cli_main(argc, argv, std::cout, std::cerr); }
