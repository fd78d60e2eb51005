#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  return splat::cli::run(argc, argv, std::cout, std::cerr);
}
