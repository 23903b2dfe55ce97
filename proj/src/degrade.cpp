// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gvr/parallel.hpp"

namespace gvr {

namespace {

constexpr float kPi = 3.14159265358979323846f;
// Cross-fade half-width: blocks hand over to their neighbours across a
// 2 * kFade = 8 px band centred on the shared edge.
constexpr int kFade = 4;

// Bilinear tap on an (H, W, 3) frame with border replication.
void sample_rgb(const Tensor& frame, float y, float x, float out[3]) {
    const int h = frame.dim(0);
    const int w = frame.dim(1);
    x = std::clamp(x, 0.0f, static_cast<float>(w - 1));
    y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const float w00 = (1.0f - fy) * (1.0f - fx);
    const float w01 = (1.0f - fy) * fx;
    const float w10 = fy * (1.0f - fx);
    const float w11 = fy * fx;
    for (int c = 0; c < 3; ++c) {
        out[c] = w00 * frame.at(y0, x0, c) + w01 * frame.at(y0, x1, c) +
                 w10 * frame.at(y1, x0, c) + w11 * frame.at(y1, x1, c);
    }
}

void check_frame_flow(const Tensor& frame, const Tensor& flow, const char* who) {
    check(frame.ndim() == 3 && frame.dim(2) == 3,
          std::string(who) + " expects an (H, W, 3) frame, got " + shape_str(frame.shape));
    check(flow.ndim() == 3 && flow.dim(2) == 2 && flow.dim(0) == frame.dim(0) &&
              flow.dim(1) == frame.dim(1),
          std::string(who) + ": flow shape " + shape_str(flow.shape) +
              " does not match frame " + shape_str(frame.shape));
}

}  // namespace

BlurKernelSpec make_blur_kernel(float magnitude, float theta) {
    int len = static_cast<int>(std::lround(2.0f * magnitude));
    len = std::clamp(len, 3, 31);
    if (len % 2 == 0) ++len;
    BlurKernelSpec spec;
    spec.length = len;
    spec.theta = theta;
    spec.weights.assign(static_cast<size_t>(len), 1.0f / static_cast<float>(len));
    return spec;
}

std::vector<EllipseSpec> sample_ellipses(const Tensor& mask, const Tensor& flow, Rng& rng,
                                         float density, float strength_min, float strength_max) {
    check(mask.ndim() == 2, "sample_ellipses expects an (H, W) mask, got " + shape_str(mask.shape));
    check(flow.ndim() == 3 && flow.dim(2) == 2 && flow.dim(0) == mask.dim(0) &&
              flow.dim(1) == mask.dim(1),
          "sample_ellipses: flow shape " + shape_str(flow.shape) + " does not match mask " +
              shape_str(mask.shape));
    check(density > 0.0f && density <= 1.0f, "sample_ellipses: density must be in (0, 1], got " +
                                                 std::to_string(density));
    check(strength_min >= 0.0f && strength_min <= strength_max && strength_max <= 1.0f,
          "sample_ellipses: strength range must satisfy 0 <= min <= max <= 1");

    const int w = mask.dim(1);
    std::vector<int64_t> on;
    for (int64_t i = 0; i < mask.numel(); ++i) {
        if (mask[i] > 0.5f) on.push_back(i);
    }
    if (on.empty()) return {};

    double mag_sum = 0.0;
    for (int64_t i : on) {
        const int y = static_cast<int>(i / w);
        const int x = static_cast<int>(i % w);
        mag_sum += std::hypot(flow.at(y, x, 0), flow.at(y, x, 1));
    }
    const float mean_a =
        std::clamp(2.0f * static_cast<float>(mag_sum / static_cast<double>(on.size())), 4.0f, 32.0f);
    const double mean_area = static_cast<double>(kPi) * mean_a * (mean_a / 2.0);
    const int count = static_cast<int>(
        std::ceil(static_cast<double>(density) * static_cast<double>(on.size()) / mean_area));

    std::vector<EllipseSpec> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int64_t pick = on[rng.below(on.size())];
        const int y = static_cast<int>(pick / w);
        const int x = static_cast<int>(pick % w);
        const float fx = flow.at(y, x, 0);
        const float fy = flow.at(y, x, 1);
        EllipseSpec e;
        e.cx = static_cast<float>(x);
        e.cy = static_cast<float>(y);
        e.a = std::clamp(2.0f * std::hypot(fx, fy), 4.0f, 32.0f);
        e.b = e.a / 2.0f;
        e.theta = std::atan2(fy, fx);
        e.s = static_cast<float>(rng.uniform(strength_min, strength_max));
        out.push_back(e);
    }
    return out;
}

Tensor blend_colors(const Tensor& curr, const Tensor& prev, const Tensor& flow,
                    const std::vector<EllipseSpec>& ellipses, Rng& rng, int samples_k) {
    check_frame_flow(curr, flow, "blend_colors");
    check(same_shape(curr.shape, prev.shape), "blend_colors: frame shapes differ: " +
                                                  shape_str(curr.shape) + " vs " +
                                                  shape_str(prev.shape));
    check(samples_k >= 1, "blend_colors: samples_k must be >= 1");

    Tensor out = curr;
    if (ellipses.empty()) return out;
    const int h = curr.dim(0);
    const int w = curr.dim(1);

    // One blend colour per ellipse: average of samples_k gaussian taps of the
    // previous frame around the flow-mapped centre (two normals per tap, x
    // jitter first). Drawn up-front, in list order, to pin RNG consumption.
    struct Region {
        EllipseSpec e;
        float cos_t, sin_t;
        float color[3];
    };
    std::vector<Region> regions;
    regions.reserve(ellipses.size());
    for (const EllipseSpec& e : ellipses) {
        const int cy = std::clamp(static_cast<int>(std::lround(e.cy)), 0, h - 1);
        const int cx = std::clamp(static_cast<int>(std::lround(e.cx)), 0, w - 1);
        const float base_x = e.cx + flow.at(cy, cx, 0);
        const float base_y = e.cy + flow.at(cy, cx, 1);
        const float sigma = e.a / 4.0f;
        double acc[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < samples_k; ++k) {
            const float jx = static_cast<float>(rng.normal()) * sigma;
            const float jy = static_cast<float>(rng.normal()) * sigma;
            float rgb[3];
            sample_rgb(prev, base_y + jy, base_x + jx, rgb);
            for (int c = 0; c < 3; ++c) acc[c] += rgb[c];
        }
        Region r;
        r.e = e;
        r.cos_t = std::cos(e.theta);
        r.sin_t = std::sin(e.theta);
        for (int c = 0; c < 3; ++c) r.color[c] = static_cast<float>(acc[c] / samples_k);
        regions.push_back(r);
    }

    parallel_for(static_cast<int64_t>(h) * w, [&](int64_t pix) {
        const int y = static_cast<int>(pix / w);
        const int x = static_cast<int>(pix % w);
        float v[3] = {out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2)};
        bool touched = false;
        for (const Region& r : regions) {
            const float dx = static_cast<float>(x) - r.e.cx;
            const float dy = static_cast<float>(y) - r.e.cy;
            if (dx * dx + dy * dy >= r.e.a * r.e.a) continue;  // outside bounding circle
            const float lx = dx * r.cos_t + dy * r.sin_t;
            const float ly = -dx * r.sin_t + dy * r.cos_t;
            const float d = std::sqrt((lx / r.e.a) * (lx / r.e.a) + (ly / r.e.b) * (ly / r.e.b));
            if (d >= 1.0f) continue;
            const float f = (1.0f - d) * r.e.s;
            for (int c = 0; c < 3; ++c) v[c] = (1.0f - f) * v[c] + f * r.color[c];
            touched = true;
        }
        if (touched) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = v[c];
        }
    });
    return out;
}

Tensor motion_blur(const Tensor& frame, const Tensor& flow, int block_px, float tau) {
    check_frame_flow(frame, flow, "motion_blur");
    check(block_px >= 1, "motion_blur: block_px must be >= 1");
    check(tau >= 0.0f, "motion_blur: tau must be >= 0");

    const int h = frame.dim(0);
    const int w = frame.dim(1);
    const int nby = (h + block_px - 1) / block_px;
    const int nbx = (w + block_px - 1) / block_px;

    // Per-block statistics and (for moving blocks) the tap offsets of the
    // oriented line kernel.
    struct Block {
        bool moving = false;
        std::vector<float> ox, oy;  // tap offsets, uniform weight 1/len
    };
    std::vector<Block> blocks(static_cast<size_t>(nby) * nbx);
    for (int by = 0; by < nby; ++by) {
        for (int bx = 0; bx < nbx; ++bx) {
            const int y0 = by * block_px, y1 = std::min(y0 + block_px, h);
            const int x0 = bx * block_px, x1 = std::min(x0 + block_px, w);
            double mag = 0.0, sfx = 0.0, sfy = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const float fx = flow.at(y, x, 0);
                    const float fy = flow.at(y, x, 1);
                    mag += std::hypot(fx, fy);
                    sfx += fx;
                    sfy += fy;
                }
            }
            const double n = static_cast<double>(y1 - y0) * (x1 - x0);
            const float m = static_cast<float>(mag / n);
            Block& blk = blocks[static_cast<size_t>(by) * nbx + bx];
            if (m <= tau) continue;
            blk.moving = true;
            const float theta = static_cast<float>(std::atan2(sfy, sfx));
            const BlurKernelSpec spec = make_blur_kernel(m, theta);
            const float ct = std::cos(theta);
            const float st = std::sin(theta);
            blk.ox.resize(static_cast<size_t>(spec.length));
            blk.oy.resize(static_cast<size_t>(spec.length));
            for (int j = 0; j < spec.length; ++j) {
                const float off = static_cast<float>(j - (spec.length - 1) / 2);
                blk.ox[static_cast<size_t>(j)] = ct * off;
                blk.oy[static_cast<size_t>(j)] = st * off;
            }
        }
    }

    // Block weight at a pixel: product of two edge ramps per axis. A ramp
    // rises linearly from 0 to 1 across the 8 px band centred on the block
    // edge; edges on the frame boundary do not fade. Adjacent blocks' ramps
    // sum to one, so jointly the moving-block weights form a partition of
    // unity wherever every nearby block moves.
    auto axis_weight = [](int v, int lo, int hi, int extent) {
        const float rise = lo == 0 ? 1.0f
                                   : std::clamp((static_cast<float>(v - lo) + kFade + 0.5f) /
                                                    (2.0f * kFade),
                                                0.0f, 1.0f);
        const float fall = hi == extent ? 1.0f
                                        : std::clamp((static_cast<float>(hi - v) + kFade - 0.5f) /
                                                         (2.0f * kFade),
                                                     0.0f, 1.0f);
        return std::min(rise, fall);
    };
    const int reach = (kFade + block_px - 1) / block_px;

    Tensor out({h, w, 3});
    parallel_for(static_cast<int64_t>(h) * w, [&](int64_t pix) {
        const int y = static_cast<int>(pix / w);
        const int x = static_cast<int>(pix % w);
        const int oby = std::min(y / block_px, nby - 1);
        const int obx = std::min(x / block_px, nbx - 1);
        if (!blocks[static_cast<size_t>(oby) * nbx + obx].moving) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = frame.at(y, x, c);
            return;
        }
        double acc[3] = {0.0, 0.0, 0.0};
        double wsum = 0.0;
        for (int by = std::max(0, oby - reach); by <= std::min(nby - 1, oby + reach); ++by) {
            for (int bx = std::max(0, obx - reach); bx <= std::min(nbx - 1, obx + reach); ++bx) {
                const Block& blk = blocks[static_cast<size_t>(by) * nbx + bx];
                if (!blk.moving) continue;
                const float wy = axis_weight(y, by * block_px,
                                             std::min((by + 1) * block_px, h), h);
                const float wx = axis_weight(x, bx * block_px,
                                             std::min((bx + 1) * block_px, w), w);
                const float wgt = wy * wx;
                if (wgt <= 0.0f) continue;
                float rgb[3];
                double tap_acc[3] = {0.0, 0.0, 0.0};
                const float inv_len = 1.0f / static_cast<float>(blk.ox.size());
                for (size_t j = 0; j < blk.ox.size(); ++j) {
                    sample_rgb(frame, static_cast<float>(y) + blk.oy[j],
                               static_cast<float>(x) + blk.ox[j], rgb);
                    for (int c = 0; c < 3; ++c) tap_acc[c] += rgb[c];
                }
                for (int c = 0; c < 3; ++c) acc[c] += wgt * (tap_acc[c] * inv_len);
                wsum += wgt;
            }
        }
        for (int c = 0; c < 3; ++c) {
            out.at(y, x, c) = static_cast<float>(acc[c] / wsum);
        }
    });
    return out;
}

Clip degrade_clip(const Clip& clip, const FlowDegradeParams& params, const Rng& rng) {
    validate_clip(clip, "degrade_clip input");
    check(clip.t() >= 2, "degrade_clip: need >= 2 frames, got " + std::to_string(clip.t()));
    check(params.tau_px > 0.0f, "degrade_clip: tau_px must be positive");
    check(params.samples_k >= 1, "degrade_clip: samples_k must be >= 1");

    const int t = clip.t();
    const int h = clip.h();
    const int w = clip.w();
    const int64_t frame_elems = static_cast<int64_t>(h) * w * 3;

    Clip out = clip;
    Tensor prev({h, w, 3});
    Tensor curr({h, w, 3});
    for (int ti = 1; ti < t; ++ti) {
        std::memcpy(prev.ptr(), clip.frames.ptr() + static_cast<int64_t>(ti - 1) * frame_elems,
                    sizeof(float) * static_cast<size_t>(frame_elems));
        std::memcpy(curr.ptr(), clip.frames.ptr() + static_cast<int64_t>(ti) * frame_elems,
                    sizeof(float) * static_cast<size_t>(frame_elems));
        const Tensor flow = estimate_flow(prev, curr);
        const Tensor mask = motion_mask(flow, params.tau_px);
        Rng frame_rng = rng.at_stream(rng.stream() + static_cast<uint64_t>(ti));
        const std::vector<EllipseSpec> ellipses = sample_ellipses(
            mask, flow, frame_rng, params.density, params.strength_min, params.strength_max);
        Tensor frame = blend_colors(curr, prev, flow, ellipses, frame_rng, params.samples_k);
        frame = motion_blur(frame, flow, params.block_px, params.tau_px);
        std::memcpy(out.frames.ptr() + static_cast<int64_t>(ti) * frame_elems, frame.ptr(),
                    sizeof(float) * static_cast<size_t>(frame_elems));
    }
    return out;
}

}  // namespace gvr
