#include <iostream>

#include "seqbayes/harness.hpp"

int main(int argc, char** argv) { return seqbayes::cli_main(argc, argv, std::cout, std::cerr); }
