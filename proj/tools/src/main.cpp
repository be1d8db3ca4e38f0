#include <iostream>

#include "cwnd/cli.hpp"

int main(int argc, char** argv) { return cwnd::cli::run(argc, argv, std::cout, std::cerr); }
