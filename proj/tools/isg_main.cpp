#include <iostream>

#include "isg/cli.hpp"

int main(int argc, char** argv) {
  return isg::cli_main(argc, argv, std::cout, std::cerr, std::cin);
}
