#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) {
  return kgqa::cli::run(argc, argv, std::cin, std::cout, std::cerr);
}
