#include <iostream>
#include <string>
#include <vector>

#include "eppo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return eppo::cli_main(args, std::cout, std::cerr);
}
