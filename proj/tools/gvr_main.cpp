// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "gvr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gvr::run_cli(std::move(args));
}
