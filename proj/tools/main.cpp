// SPDX-License-Identifier: Apache-2.0

#include "eesim/experiments.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return eesim::cli_main(args);
}
