#include <iostream>
#include <string>
#include <vector>

#include "frl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return frl::cli::main(args, std::cout, std::cerr);
}
