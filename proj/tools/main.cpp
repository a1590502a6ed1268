#include <iostream>

#include "empc/commands.hpp"

int main(int argc, char** argv) { return empc::cmd::cli_main(argc, argv, std::cout, std::cerr); }
