#include <iostream>
#include <string>
#include <vector>

#include "berrysmith/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return berrysmith::run_cli(args, std::cout, std::cerr);
}
