// Copyright 2026 The dynvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return dynvox::cli::main(argc, argv, std::cout, std::cerr); }
