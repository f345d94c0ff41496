// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "svodrive/cli.hpp"

int main(int argc, char** argv) { return svo::cli::run(argc, argv, std::cout, std::cerr); }
