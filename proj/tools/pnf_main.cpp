// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "pnf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pnf::cli::run_command(args);
}
