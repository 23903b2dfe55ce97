// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace gvr {

// The `gvr` command-line driver. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 validation failure, 2 runtime failure,
// 3 numeric failure.
int run_cli(std::vector<std::string> args);

}  // namespace gvr
