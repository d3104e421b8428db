// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "vpp/cli.hpp"

int main(int argc, char** argv) {
  return vpp::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
