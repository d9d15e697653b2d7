#include <iostream>
#include <string>
#include <vector>

#include "archstamp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return archstamp::run(args, std::cout, std::cerr);
}
