#include <iostream>
#include <string>
#include <vector>

#include "rnnmf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return rnnmf::cli::run(args, std::cout, std::cerr);
}
