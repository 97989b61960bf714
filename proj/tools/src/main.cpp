#include <iostream>

#include "metagen_cli/cli.hpp"

int main(int argc, char** argv) { return metagen::cli::run(argc, argv, std::cout, std::cerr); }
