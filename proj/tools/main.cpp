#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  geomflow::cli::configure_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return geomflow::cli::run(args, std::cout, std::cerr);
}
