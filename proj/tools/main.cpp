#include <iostream>

#include "voxport/cli.hpp"

int main(int argc, char** argv) { return voxport::run(argc, argv, std::cout, std::cerr); }
