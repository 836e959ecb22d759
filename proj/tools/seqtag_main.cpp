// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "seqtag/cli.hpp"

int main(int argc, char** argv) {
  return seqtag::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
