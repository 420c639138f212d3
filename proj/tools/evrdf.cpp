#include <iostream>

#include "evrdf/cli.hpp"

int main(int argc, char** argv) { return evrdf::cli::dispatch(argc, argv, std::cout, std::cerr); }
