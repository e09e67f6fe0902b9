#include <iostream>

#include "lmc/cli.hpp"

int main(int argc, char** argv) {
  return lmc::cli::run({argv + 1, argv + argc}, lmc::process_environment(), std::cout, std::cerr);
}
