#include <iostream>

#include "tmslab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tms::cli::run(args, std::cout, std::cerr);
}
