// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gvr/clip.hpp"

namespace gvr {

// Dense displacement between adjacent frames: vectors[t](y, x) maps a pixel of
// frame t+1 to its position in frame t, in pixels (x component first).
struct FlowField {
    Tensor vectors;  // (T-1, H, W, 2)
};

// Motion mask per frame pair after thresholding ||flow|| > tau and a 3x3
// morphological close.
struct MotionMask {
    Tensor mask;  // (T-1, H, W), values 0 or 1
    float tau = 1.5f;
};

// Coarse-to-fine inverse-search block matcher (8x8 patches on a luma
// pyramid with ceil(log2(min(H,W)/16)) levels). prev/curr are (H, W, 3)
// frames or (H, W) luma planes, at least 32x32. Returns (H, W, 2).
Tensor estimate_flow(const Tensor& prev, const Tensor& curr);

// Flow for every adjacent pair of a clip.
FlowField estimate_clip_flow(const Clip& clip);

// One (H, W, 2) flow plane -> 0/1 mask (H, W).
Tensor motion_mask(const Tensor& flow, float tau);

MotionMask clip_motion_mask(const FlowField& field, float tau);

}  // namespace gvr
