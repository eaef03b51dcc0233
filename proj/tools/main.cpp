#include <iostream>

#include "permsync/cli.hpp"

int main(int argc, char** argv) { return permsync::cli::run(argc, argv, std::cout, std::cerr); }
