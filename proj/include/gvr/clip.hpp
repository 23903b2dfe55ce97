// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gvr/tensor.hpp"

namespace gvr {

// A frame sequence: (T, H, W, 3) float tensor with values in [0,1].
// frame_rate is carried as metadata only. H and W must be even so every
// container in the toolchain can represent the clip.
struct Clip {
    Tensor frames;
    double frame_rate = 24.0;

    Clip() = default;
    Clip(Tensor f, double fps) : frames(std::move(f)), frame_rate(fps) {}

    int t() const { return frames.dim(0); }
    int h() const { return frames.dim(1); }
    int w() const { return frames.dim(2); }

    float& px(int t_, int y, int x, int c) { return frames.at(t_, y, x, c); }
    float px(int t_, int y, int x, int c) const { return frames.at(t_, y, x, c); }
};

Clip make_clip(int t, int h, int w, double fps = 24.0);

// Checks rank/extent invariants (C == 3, T >= 1, even H and W).
void validate_clip(const Clip& clip, const std::string& what);

// Values clamped to [0,1] (writers apply this before quantization).
Clip clamp01(const Clip& clip);

}  // namespace gvr
