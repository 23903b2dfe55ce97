// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0

#include "gvr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gvr/latent.hpp"
#include "gvr/signal.hpp"

namespace gvr {

namespace {

constexpr double kPi = 3.14159265358979323846;

int floordiv(int a, int b) {
    int q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

float clamp01f(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

}  // namespace

Clip synthetic_clip(const SyntheticSpec& spec, uint64_t seed, int index) {
    check(spec.frames >= 1, "synthetic_clip: frames must be positive");
    check(spec.h >= 8 && spec.w >= 8 && spec.h % 2 == 0 && spec.w % 2 == 0,
          "synthetic_clip: extents must be even and at least 8");
    check(index >= 0, "synthetic_clip: index must be non-negative");
    Rng rng = Rng(seed).at_stream(static_cast<uint64_t>(index));

    // Gradient: orientation, drift velocity, per-channel offset and amplitude.
    double phi = rng.uniform(0.0, 2.0 * kPi);
    double nx = std::cos(phi), ny = std::sin(phi);
    double drift = rng.uniform(0.02, 0.12);  // cycles per frame
    double off[3], amp[3];
    for (int c = 0; c < 3; ++c) {
        off[c] = rng.uniform(0.35, 0.65);
        amp[c] = rng.uniform(0.15, 0.30);
    }

    // Checkerboard patch: cell size, two contrasting colours, a covering
    // rectangle, and an integer per-frame velocity (edges stay pixel-aligned,
    // so the HR clip genuinely contains detail the LR clip cannot represent).
    int cell = 4 << rng.below(2);  // 4 or 8 px
    float ca[3], cb[3];
    for (int c = 0; c < 3; ++c) {
        ca[c] = static_cast<float>(rng.uniform(0.0, 1.0));
        double away = ca[c] < 0.5 ? 1.0 : -1.0;
        cb[c] = clamp01f(ca[c] + away * rng.uniform(0.35, 0.6));
    }
    int rect_h = spec.h / 2 + static_cast<int>(rng.below(static_cast<uint64_t>(spec.h / 4) + 1));
    int rect_w = spec.w / 2 + static_cast<int>(rng.below(static_cast<uint64_t>(spec.w / 4) + 1));
    int ry0 = static_cast<int>(rng.below(static_cast<uint64_t>(spec.h - rect_h) + 1));
    int rx0 = static_cast<int>(rng.below(static_cast<uint64_t>(spec.w - rect_w) + 1));
    int ux = static_cast<int>(rng.below(5)) - 2;
    int uy = static_cast<int>(rng.below(5)) - 2;

    double wavelength = std::sqrt(static_cast<double>(spec.h) * spec.h +
                                  static_cast<double>(spec.w) * spec.w);
    Clip clip = make_clip(spec.frames, spec.h, spec.w, spec.fps);
    for (int t = 0; t < spec.frames; ++t) {
        for (int y = 0; y < spec.h; ++y) {
            for (int x = 0; x < spec.w; ++x) {
                bool in_rect = y >= ry0 && y < ry0 + rect_h && x >= rx0 && x < rx0 + rect_w;
                if (in_rect) {
                    int parity = (floordiv(x - rx0 - t * ux, cell) +
                                  floordiv(y - ry0 - t * uy, cell)) &
                                 1;
                    const float* col = parity ? cb : ca;
                    for (int c = 0; c < 3; ++c) clip.px(t, y, x, c) = col[c];
                } else {
                    double phase = (nx * x + ny * y) / wavelength + phi / (2.0 * kPi) + t * drift;
                    double s = std::sin(2.0 * kPi * phase);
                    for (int c = 0; c < 3; ++c)
                        clip.px(t, y, x, c) = clamp01f(off[c] + amp[c] * s);
                }
            }
        }
    }
    return clip;
}

TrainBatch one_order_batch(const Clip& hr, int factor, CodecDesc codec) {
    validate_clip(hr, "one_order_batch");
    check(factor >= 1, "one_order_batch: factor must be >= 1");
    check(hr.h() % (codec.fs * factor) == 0 && hr.w() % (codec.fs * factor) == 0,
          "one_order_batch: clip extents must divide by fs x factor");
    Clip lr(bicubic_resize_thwc(hr.frames, hr.h() / factor, hr.w() / factor), hr.frame_rate);
    lr = clamp01(lr);  // bicubic overshoot
    TrainBatch batch;
    batch.z0 = encode(hr, codec);
    batch.c0 = encode(lr, codec);
    return batch;
}

std::vector<TrainBatch> make_stage1_batches(const SyntheticSpec& spec, int n_clips, int factor,
                                            uint64_t seed) {
    check(n_clips >= 1, "make_stage1_batches: need at least one clip");
    std::vector<TrainBatch> out;
    out.reserve(static_cast<size_t>(n_clips));
    for (int i = 0; i < n_clips; ++i)
        out.push_back(one_order_batch(synthetic_clip(spec, seed, i), factor));
    return out;
}

std::vector<TrainBatch> make_stage2_batches(const SyntheticSpec& spec, int n_clips,
                                            const Stage2Options& opt, uint64_t seed) {
    check(n_clips >= 1, "make_stage2_batches: need at least one clip");
    check(opt.sdedit_alpha >= 0.0 && opt.sdedit_alpha <= 1.0,
          "make_stage2_batches: sdedit alpha must lie in [0, 1]");
    ContractiveToyVelocity toy;
    const VelocityField& prior = opt.prior ? *opt.prior : toy;
    CodecDesc codec{};
    std::vector<TrainBatch> out;
    out.reserve(static_cast<size_t>(n_clips));
    for (int i = 0; i < n_clips; ++i) {
        Clip hr = synthetic_clip(spec, seed, i);
        check(hr.h() % (codec.fs * opt.factor) == 0 && hr.w() % (codec.fs * opt.factor) == 0,
              "make_stage2_batches: clip extents must divide by fs x factor");
        Clip lr(bicubic_resize_thwc(hr.frames, hr.h() / opt.factor, hr.w() / opt.factor),
                hr.frame_rate);
        lr = clamp01(lr);
        // Degradation at the LR side, mirroring how T2V artifacts appear in
        // the conditioning signal. Stream blocks of 64 keep the per-frame
        // degradation streams of different clips disjoint.
        Clip lr_deg = degrade_clip(lr, opt.degrade, Rng(seed, 100000 + 64 * static_cast<uint64_t>(i)));
        Latent c0 = encode(lr_deg, codec);
        Rng sd_rng(seed, 200000 + static_cast<uint64_t>(i));
        c0 = sdedit_degrade(prior, c0, opt.sdedit_alpha, opt.sdedit_steps, sd_rng);
        TrainBatch batch;
        batch.z0 = encode(hr, codec);
        batch.c0 = std::move(c0);
        out.push_back(std::move(batch));
    }
    return out;
}

double psnr(const Tensor& a, const Tensor& b) {
    check(same_shape(a.shape, b.shape), "psnr: shape mismatch");
    double m = mse(a, b);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

Clip bilinear_upsample_clip(const Clip& lr, int factor) {
    validate_clip(lr, "bilinear_upsample_clip");
    check(factor >= 1, "bilinear_upsample_clip: factor must be >= 1");
    Clip out(bilinear_resize_thwc(lr.frames, lr.h() * factor, lr.w() * factor), lr.frame_rate);
    return clamp01(out);
}

}  // namespace gvr
