// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "gvr/clip.hpp"
#include "gvr/degrade.hpp"
#include "gvr/flow_match.hpp"
#include "gvr/model.hpp"

namespace gvr {

// Desk-scale synthetic corpus: every clip is a drifting sinusoidal colour
// gradient with a moving hard-edged checkerboard patch on top. The gradient
// exercises smooth content, the checkerboard carries the high-frequency
// detail an upsampler is supposed to restore; both move with per-clip random
// velocities. Clip `index` is deterministic in (seed, index).
struct SyntheticSpec {
    int frames = 17;
    int h = 64;
    int w = 64;
    double fps = 24.0;
};

Clip synthetic_clip(const SyntheticSpec& spec, uint64_t seed, int index);

// One-order degradation pair: the LR side is just a bicubic downsample of the
// HR clip by `factor`; both sides are encoded to latents.
TrainBatch one_order_batch(const Clip& hr, int factor, CodecDesc codec = {});

// Stage-1 data: one-order pairs over `n_clips` synthetic clips.
std::vector<TrainBatch> make_stage1_batches(const SyntheticSpec& spec, int n_clips, int factor,
                                            uint64_t seed);

// Stage-2 data: the LR side runs the full degradation chain -- bicubic
// downsample, flow-based degradation in pixel space, then model-guided
// (SDEdit) degradation in latent space under `prior` (the contractive toy
// field when null).
struct Stage2Options {
    int factor = 2;
    FlowDegradeParams degrade;
    double sdedit_alpha = 0.4;
    int sdedit_steps = 5;
    const VelocityField* prior = nullptr;
};

std::vector<TrainBatch> make_stage2_batches(const SyntheticSpec& spec, int n_clips,
                                            const Stage2Options& opt, uint64_t seed);

// Peak signal-to-noise ratio in dB for [0, 1] data; +inf for identical input.
double psnr(const Tensor& a, const Tensor& b);

// The reference upsampler the model has to beat: per-frame bilinear resize.
Clip bilinear_upsample_clip(const Clip& lr, int factor);

}  // namespace gvr
