#include <iostream>

#include "tcpshare/commands.hpp"

int main(int argc, char** argv) { return tcpshare::cli::run(argc, argv, std::cout, std::cerr); }
