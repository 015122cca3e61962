#include <iostream>
#include <string>
#include <vector>

#include "seaget/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seaget::run_cli(args, std::cout, std::cerr);
}
