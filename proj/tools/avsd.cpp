#include <iostream>

#include "avsd/cli.hpp"

int main(int argc, char** argv) {
  return avsd::cli::run(std::vector<std::string>(argv, argv + argc), std::cin, std::cout, std::cerr);
}
