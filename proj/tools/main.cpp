#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

auto main(int argc, char** argv) -> int {
  auto args = std::vector<std::string>(argv + 1, argv + argc);
  return starparadox::cli::run(args, std::cout, std::cerr);
}
