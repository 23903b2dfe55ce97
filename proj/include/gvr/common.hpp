// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvr {

// Error taxonomy maps onto CLI exit codes: validation -> 1, runtime -> 2,
// numeric (NaN/Inf) -> 3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RuntimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

inline void check_runtime(bool cond, const std::string& msg) {
    if (!cond) throw RuntimeError(msg);
}

inline void check_finite_msg(bool cond, const std::string& msg) {
    if (!cond) throw NumericError(msg);
}

// FNV-1a over raw bytes. Used for condition-fixity asserts and config digests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace gvr
