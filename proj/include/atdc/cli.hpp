// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace atdc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // gradcheck found a bad gradient
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

/// Runs one `atdc` invocation; args[0] is the program name. Returns the exit
/// code instead of terminating.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace atdc
