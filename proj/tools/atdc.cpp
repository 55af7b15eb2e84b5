// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/cli.hpp"

int main(int argc, char** argv) { return atdc::run_cli(std::vector<std::string>(argv, argv + argc)); }
