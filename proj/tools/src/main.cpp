#include <iostream>
#include <string>
#include <vector>

#include "uai/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return uai::cli::Run(args, std::cout, std::cerr);
}
