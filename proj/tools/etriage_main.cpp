#include <iostream>
#include <string>
#include <vector>

#include "etriage/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return etriage::cli::run(args, std::cout, std::cerr);
}
