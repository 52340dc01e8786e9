#include <iostream>

#include "feedrel/cli.hpp"

int main(int argc, char** argv) { return feedrel::run_cli(argc, argv, std::cout, std::cerr); }
