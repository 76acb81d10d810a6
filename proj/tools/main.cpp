#include <iostream>
#include <string>
#include <vector>

#include "imupen/cli.hpp"

int main(int argc, char** argv) {
  return imupen::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
