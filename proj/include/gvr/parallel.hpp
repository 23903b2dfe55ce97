// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace gvr {

// Process-wide worker count for data-parallel loops. 0 means "hardware".
void set_workers(int n);
int workers();

// Runs fn(i) for i in [0, n). Each index is computed by exactly one worker
// with a fixed sequential inner order, so results are bitwise identical for
// any worker count. fn must write only to index-owned outputs.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Chunked variant: fn(begin, end) over disjoint ranges.
void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace gvr
