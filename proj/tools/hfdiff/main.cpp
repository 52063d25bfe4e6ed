// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "hfdiff/commands.hpp"

int main(int argc, char** argv) { return hfdiff::cli::run_cli(argc, argv, std::cout, std::cerr); }
