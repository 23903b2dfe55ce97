// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gvr/clip.hpp"
#include "gvr/flow.hpp"
#include "gvr/rng.hpp"

namespace gvr {

// Knobs for the flow-driven degradation pipeline. Serialized under the
// `flow_degrade` section of the JSON config.
struct FlowDegradeParams {
    float tau_px = 1.5f;       // motion threshold: ||flow|| <= tau is static
    int block_px = 16;         // blur block size
    float density = 0.5f;      // ellipse coverage of the masked area
    int samples_k = 16;        // colour samples averaged per ellipse
    float strength_min = 0.3f;  // blend strength lower bound
    float strength_max = 0.7f;  // blend strength upper bound
};

// One colour-blend region: centre in pixels, semi-axes a >= b > 0, major-axis
// orientation theta (radians, along the local flow), blend strength s in [0,1].
struct EllipseSpec {
    float cx = 0.0f;
    float cy = 0.0f;
    float a = 1.0f;
    float b = 1.0f;
    float theta = 0.0f;
    float s = 0.0f;
};

// Line blur kernel: odd tap count `length`, orientation theta, uniform taps
// normalized to sum 1.
struct BlurKernelSpec {
    int length = 1;
    float theta = 0.0f;
    std::vector<float> weights;
};

// Kernel for a region moving `magnitude` pixels along `theta`:
// length = clamp(round(2 * magnitude), 3, 31), bumped up to odd.
BlurKernelSpec make_blur_kernel(float magnitude, float theta);

// Draw ceil(density * masked-area / mean-ellipse-area) ellipses with centres
// uniform over mask pixels; a = clamp(2*||flow||, 4, 32), b = a/2, theta from
// the flow direction at the centre, s ~ U(strength_min, strength_max).
// Empty mask yields an empty list.
std::vector<EllipseSpec> sample_ellipses(const Tensor& mask, const Tensor& flow, Rng& rng,
                                         float density, float strength_min = 0.3f,
                                         float strength_max = 0.7f);

// Blend previous-frame colour into `curr` inside each ellipse. The blend
// colour is the mean of samples_k bilinear taps of `prev` around the
// flow-mapped centre, jittered by N(0, (a/4)^2) per coordinate; each pixel
// mixes (1 - w*s)*curr + w*s*colour with w = max(0, 1 - d) and d the
// normalized elliptical distance (0 at the centre, 1 on the boundary).
// Pixels outside every ellipse are untouched.
Tensor blend_colors(const Tensor& curr, const Tensor& prev, const Tensor& flow,
                    const std::vector<EllipseSpec>& ellipses, Rng& rng, int samples_k = 16);

// Block-adaptive line blur. Per block: m = mean flow magnitude, theta = mean
// flow direction; blocks with m <= tau are copied bitwise, others are blurred
// with make_blur_kernel(m, theta) and cross-faded over an 8 px overlap
// (moving blocks only, so static blocks never bleed).
Tensor motion_blur(const Tensor& frame, const Tensor& flow, int block_px, float tau);

// Full pipeline: estimate flow, mask motion, blend colours, then blur.
// Frame 0 passes through unchanged; frame t consumes RNG stream
// (rng.stream() + t), so frames are reproducible independently of order.
Clip degrade_clip(const Clip& clip, const FlowDegradeParams& params, const Rng& rng);

}  // namespace gvr
