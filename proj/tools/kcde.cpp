#include "kcde/cli.hpp"

#include <iostream>

int
main(int argc, char** argv)
{
  return kcde::cli::run(argc, argv, std::cout, std::cerr);
}
