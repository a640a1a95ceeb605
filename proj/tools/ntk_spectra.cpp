#include <iostream>

#include "ntks/cli/commands.hpp"

int main(int argc, char** argv) { return ntks::cli::main_entry(argc, argv, std::cout, std::cerr); }
