#include <iostream>

#include "hjlab/experiment.hpp"

int main(int argc, char** argv) { return hjlab::run_cli(argc, argv, std::cout, std::cerr); }
