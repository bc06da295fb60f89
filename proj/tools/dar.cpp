#include <iostream>

#include "dar/cli.hpp"

int main(int argc, char** argv) { return dar::cli::run(argc, argv, std::cout, std::cerr); }
