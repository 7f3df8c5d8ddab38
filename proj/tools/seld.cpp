#include <iostream>
#include <string>
#include <vector>

#include "seld/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seld::app::run_cli(args, std::cout, std::cerr);
}
