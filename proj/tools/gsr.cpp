#include <iostream>

#include "gsr/cli/commands.hpp"

int main(int argc, char** argv) {
  return gsr::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
