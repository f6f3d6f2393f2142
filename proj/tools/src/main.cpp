#include <iostream>

#include "promim/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return promim::cli::run(args, std::cout, std::cerr);
}
