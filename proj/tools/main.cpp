#include <iostream>

#include "tiltxter/commands.hpp"

int main(int argc, char** argv) { return tiltxter::cli::run(argc, argv, std::cout, std::cerr); }
