#include <iostream>

#include "dlqg/cli.hpp"

int main(int argc, char** argv) { return dlqg::cli::run(argc, argv, std::cout, std::cerr); }
