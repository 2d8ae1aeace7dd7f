#include <iostream>

#include "miniomp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return miniomp::execute_cli(args, std::cout, std::cerr);
}
