#include <iostream>

#include "mmii/cli.hpp"

int main(int argc, char** argv) {
  return mmii::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
