#include <iostream>

#include "conicflow_cli/commands.hpp"

int main(int argc, char** argv) { return conicflow::cli::main_entry(argc, argv, std::cout, std::cerr); }
