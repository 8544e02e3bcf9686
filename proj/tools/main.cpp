#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return shrinknas::cli::run(args, std::cout, std::cerr);
}
