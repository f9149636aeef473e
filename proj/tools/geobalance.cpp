#include <iostream>

#include "geobalance/cli.hpp"

int main(int argc, char** argv) {
  return geobalance::cli_main(argc, argv, std::cout, std::cerr);
}
