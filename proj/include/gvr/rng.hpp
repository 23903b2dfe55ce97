// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "gvr/common.hpp"

namespace gvr {

// Counter-based generator: value = f(seed, stream, index). The same
// (seed, stream, index) triple yields the same draw no matter which thread
// asks for it or in what order, so frame- and sample-parallel pipelines stay
// reproducible. Streams are cheap; derive one per frame / per sample.
class Rng {
  public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }
    uint64_t counter() const { return counter_; }

    // Fresh generator on a different stream of the same seed.
    Rng at_stream(uint64_t stream) const { return Rng(seed_, stream); }

    // Raw 64-bit word at an absolute draw index (does not advance).
    uint64_t word_at(uint64_t index) const {
        return mix64(key_ ^ mix64(index + 0x8cb92ba72f3d8dd7ull));
    }

    // U[0,1) -- 53-bit mantissa.
    double uniform() { return to_unit(next_word()); }

    // U(0,1] -- safe for log().
    double uniform_open() { return 1.0 - to_unit(next_word()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. Consumes exactly two words.
    double normal() {
        double u1 = 1.0 - to_unit(next_word());
        double u2 = to_unit(next_word());
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Integer in [0, n).
    uint64_t below(uint64_t n) {
        check(n > 0, "Rng::below: n must be positive");
        return next_word() % n;
    }

    void skip(uint64_t n) { counter_ += n; }

  private:
    static uint64_t mix64(uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    static uint64_t derive_key(uint64_t seed, uint64_t stream) {
        return mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ull + 0x2545f4914f6cdd1dull));
    }

    static double to_unit(uint64_t w) { return (w >> 11) * 0x1.0p-53; }

    uint64_t next_word() { return word_at(counter_++); }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace gvr
