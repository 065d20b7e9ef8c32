#include <iostream>

#include "fav/cli.hpp"

int main(int argc, char** argv) { return fav::run_cli(argc, argv, std::cout, std::cerr); }
