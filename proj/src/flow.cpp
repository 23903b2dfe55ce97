// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"

namespace gvr {

namespace {

constexpr int kPatch = 8;
constexpr int kStride = 4;
constexpr int kIters = 8;
constexpr float kLambda = 1e-3f;

Tensor to_luma(const Tensor& frame) {
    if (frame.ndim() == 2) return frame;
    check(frame.ndim() == 3 && frame.dim(2) == 3,
          "estimate_flow expects (H, W) or (H, W, 3) frames, got " + shape_str(frame.shape));
    return rec601_luma(frame);
}

float sample_clamped(const Tensor& plane, int h, int w, float y, float x) {
    x = std::clamp(x, 0.0f, static_cast<float>(w - 1));
    y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
    int x0 = static_cast<int>(x);
    int y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    float fx = x - static_cast<float>(x0);
    float fy = y - static_cast<float>(y0);
    const float* p = plane.ptr();
    float top = p[y0 * w + x0] * (1.0f - fx) + p[y0 * w + x1] * fx;
    float bot = p[y1 * w + x0] * (1.0f - fx) + p[y1 * w + x1] * fx;
    return top * (1.0f - fy) + bot * fy;
}

// Patch anchor positions along one axis: every kStride pixels plus a forced
// final anchor so the last patch ends exactly at the border. Consecutive
// anchors are at most kStride apart, so the patches tile the full extent.
std::vector<int> patch_grid(int extent) {
    std::vector<int> pos;
    for (int p = 0; p + kPatch <= extent; p += kStride) pos.push_back(p);
    if (pos.empty() || pos.back() != extent - kPatch) pos.push_back(extent - kPatch);
    return pos;
}

// Inverse-search refinement of one pyramid level. `init` is the dense flow
// carried up from the coarser level ((h, w, 2) or empty at the coarsest) and
// the return value is the densified flow at this level.
Tensor refine_level(const Tensor& prev, const Tensor& curr, const Tensor& init) {
    const int h = curr.dim(0);
    const int w = curr.dim(1);
    const std::vector<int> ys = patch_grid(h);
    const std::vector<int> xs = patch_grid(w);
    const int ny = static_cast<int>(ys.size());
    const int nx = static_cast<int>(xs.size());
    const float comp_limit = static_cast<float>(std::max(h, w));

    Tensor patch_flow({ny, nx, 2});
    parallel_for(static_cast<int64_t>(ny) * nx, [&](int64_t pi) {
        const int iy = static_cast<int>(pi / nx);
        const int ix = static_cast<int>(pi % nx);
        const int y0 = ys[iy];
        const int x0 = xs[ix];

        float ux = 0.0f;
        float uy = 0.0f;
        if (init.numel() > 0) {
            const int cy = std::min(y0 + kPatch / 2, h - 1);
            const int cx = std::min(x0 + kPatch / 2, w - 1);
            ux = init.at(cy, cx, 0);
            uy = init.at(cy, cx, 1);
        }

        // Template values and gradients come from the current frame, so the
        // 2x2 normal matrix is fixed across iterations (inverse search).
        float tv[kPatch * kPatch];
        float gx[kPatch * kPatch];
        float gy[kPatch * kPatch];
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (int py = 0; py < kPatch; ++py) {
            for (int px = 0; px < kPatch; ++px) {
                const int y = y0 + py;
                const int x = x0 + px;
                const int i = py * kPatch + px;
                tv[i] = curr.at(y, x);
                const float dx = 0.5f * (curr.at(y, std::min(x + 1, w - 1)) -
                                         curr.at(y, std::max(x - 1, 0)));
                const float dy = 0.5f * (curr.at(std::min(y + 1, h - 1), x) -
                                         curr.at(std::max(y - 1, 0), x));
                gx[i] = dx;
                gy[i] = dy;
                sxx += dx * dx;
                sxy += dx * dy;
                syy += dy * dy;
            }
        }
        const double a = sxx + kLambda;
        const double d = syy + kLambda;
        const double det = a * d - sxy * sxy;
        if (det > 1e-12) {
            const double ia = d / det;
            const double ib = -sxy / det;
            const double id = a / det;
            for (int it = 0; it < kIters; ++it) {
                double bx = 0.0, by = 0.0;
                for (int py = 0; py < kPatch; ++py) {
                    for (int px = 0; px < kPatch; ++px) {
                        const int i = py * kPatch + px;
                        const float r = sample_clamped(prev, h, w, static_cast<float>(y0 + py) + uy,
                                                       static_cast<float>(x0 + px) + ux) -
                                        tv[i];
                        bx += static_cast<double>(gx[i]) * r;
                        by += static_cast<double>(gy[i]) * r;
                    }
                }
                const float step_x = static_cast<float>(ia * bx + ib * by);
                const float step_y = static_cast<float>(ib * bx + id * by);
                ux -= step_x;
                uy -= step_y;
                if (step_x * step_x + step_y * step_y < 1e-8f) break;
            }
        }
        patch_flow.at(iy, ix, 0) = std::clamp(ux, -comp_limit, comp_limit);
        patch_flow.at(iy, ix, 1) = std::clamp(uy, -comp_limit, comp_limit);
    });

    // Densify: each pixel averages the flows of every patch that covers it.
    // Pure gather, so the parallel write pattern is one pixel per index.
    Tensor dense({h, w, 2});
    parallel_for(static_cast<int64_t>(h) * w, [&](int64_t pix) {
        const int y = static_cast<int>(pix / w);
        const int x = static_cast<int>(pix % w);
        auto first_cover = [](const std::vector<int>& pos, int v) {
            return std::lower_bound(pos.begin(), pos.end(), v - (kPatch - 1)) - pos.begin();
        };
        double fx = 0.0, fy = 0.0;
        int n = 0;
        for (size_t iy = first_cover(ys, y); iy < ys.size() && ys[iy] <= y; ++iy) {
            for (size_t ix = first_cover(xs, x); ix < xs.size() && xs[ix] <= x; ++ix) {
                fx += patch_flow.at(static_cast<int>(iy), static_cast<int>(ix), 0);
                fy += patch_flow.at(static_cast<int>(iy), static_cast<int>(ix), 1);
                ++n;
            }
        }
        dense.at(y, x, 0) = static_cast<float>(fx / n);
        dense.at(y, x, 1) = static_cast<float>(fy / n);
    });
    return dense;
}

Tensor upsample_flow(const Tensor& flow, int nh, int nw) {
    const int h = flow.dim(0);
    const int w = flow.dim(1);
    const float sx = static_cast<float>(nw) / static_cast<float>(w);
    const float sy = static_cast<float>(nh) / static_cast<float>(h);
    Tensor plane({h, w});
    Tensor up({nh, nw});
    Tensor out({nh, nw, 2});
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) plane.at(y, x) = flow.at(y, x, c);
        bilinear_plane(plane.ptr(), h, w, up.ptr(), nh, nw);
        const float s = c == 0 ? sx : sy;
        for (int y = 0; y < nh; ++y)
            for (int x = 0; x < nw; ++x) out.at(y, x, c) = up.at(y, x) * s;
    }
    return out;
}

}  // namespace

Tensor estimate_flow(const Tensor& prev, const Tensor& curr) {
    Tensor prev_l = to_luma(prev);
    Tensor curr_l = to_luma(curr);
    check(same_shape(prev_l.shape, curr_l.shape),
          "estimate_flow: frame shapes differ: " + shape_str(prev.shape) + " vs " +
              shape_str(curr.shape));
    const int h = curr_l.dim(0);
    const int w = curr_l.dim(1);
    check(h >= 32 && w >= 32, "estimate_flow needs frames of at least 32x32, got " +
                                  std::to_string(h) + "x" + std::to_string(w));

    // Halve (rounding up) until the short side is at most 32; the coarsest
    // level then sits in (16, 32] pixels, comfortably above the 8x8 patch.
    int n_levels = 1;
    for (int m = std::min(h, w); m > 32; m = (m + 1) / 2) ++n_levels;

    std::vector<Tensor> prev_pyr(static_cast<size_t>(n_levels));
    std::vector<Tensor> curr_pyr(static_cast<size_t>(n_levels));
    prev_pyr[0] = std::move(prev_l);
    curr_pyr[0] = std::move(curr_l);
    for (int l = 1; l < n_levels; ++l) {
        const Tensor& pp = prev_pyr[static_cast<size_t>(l - 1)];
        const Tensor& pc = curr_pyr[static_cast<size_t>(l - 1)];
        const int nh = (pp.dim(0) + 1) / 2;
        const int nw = (pp.dim(1) + 1) / 2;
        Tensor dp({nh, nw});
        Tensor dc({nh, nw});
        bilinear_plane(pp.ptr(), pp.dim(0), pp.dim(1), dp.ptr(), nh, nw);
        bilinear_plane(pc.ptr(), pc.dim(0), pc.dim(1), dc.ptr(), nh, nw);
        prev_pyr[static_cast<size_t>(l)] = std::move(dp);
        curr_pyr[static_cast<size_t>(l)] = std::move(dc);
    }

    Tensor flow;
    for (int l = n_levels - 1; l >= 0; --l) {
        const Tensor& pl = prev_pyr[static_cast<size_t>(l)];
        const Tensor& cl = curr_pyr[static_cast<size_t>(l)];
        if (flow.numel() > 0) flow = upsample_flow(flow, pl.dim(0), pl.dim(1));
        flow = refine_level(pl, cl, flow);
    }
    return flow;
}

FlowField estimate_clip_flow(const Clip& clip) {
    validate_clip(clip, "estimate_clip_flow input");
    check(clip.t() >= 2, "estimate_clip_flow needs at least 2 frames, got " +
                             std::to_string(clip.t()));
    const int t = clip.t();
    const int h = clip.h();
    const int w = clip.w();
    const int64_t frame_elems = static_cast<int64_t>(h) * w * 3;

    FlowField field;
    field.vectors = Tensor({t - 1, h, w, 2});
    Tensor prev({h, w, 3});
    Tensor curr({h, w, 3});
    std::memcpy(prev.ptr(), clip.frames.ptr(), sizeof(float) * static_cast<size_t>(frame_elems));
    for (int ti = 1; ti < t; ++ti) {
        std::memcpy(curr.ptr(), clip.frames.ptr() + ti * frame_elems,
                    sizeof(float) * static_cast<size_t>(frame_elems));
        Tensor flow = estimate_flow(prev, curr);
        std::memcpy(field.vectors.ptr() + static_cast<int64_t>(ti - 1) * h * w * 2, flow.ptr(),
                    sizeof(float) * static_cast<size_t>(h) * w * 2);
        std::swap(prev, curr);
    }
    return field;
}

Tensor motion_mask(const Tensor& flow, float tau) {
    check(flow.ndim() == 3 && flow.dim(2) == 2,
          "motion_mask expects an (H, W, 2) flow plane, got " + shape_str(flow.shape));
    const int h = flow.dim(0);
    const int w = flow.dim(1);
    const float tau2 = tau * tau;

    Tensor raw({h, w});
    parallel_for(static_cast<int64_t>(h) * w, [&](int64_t pix) {
        const int y = static_cast<int>(pix / w);
        const int x = static_cast<int>(pix % w);
        const float fx = flow.at(y, x, 0);
        const float fy = flow.at(y, x, 1);
        raw.at(y, x) = fx * fx + fy * fy > tau2 ? 1.0f : 0.0f;
    });

    // 3x3 morphological close (dilate then erode) to fill pinholes and knit
    // fragmented regions; the neighbourhood is clipped at the borders.
    auto morph = [&](const Tensor& src, bool dilate) {
        Tensor dst({h, w});
        parallel_for(static_cast<int64_t>(h) * w, [&](int64_t pix) {
            const int y = static_cast<int>(pix / w);
            const int x = static_cast<int>(pix % w);
            float v = dilate ? 0.0f : 1.0f;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    const float s = src.at(yy, xx);
                    v = dilate ? std::max(v, s) : std::min(v, s);
                }
            }
            dst.at(y, x) = v;
        });
        return dst;
    };
    return morph(morph(raw, true), false);
}

MotionMask clip_motion_mask(const FlowField& field, float tau) {
    check(field.vectors.ndim() == 4 && field.vectors.dim(3) == 2,
          "clip_motion_mask expects (T-1, H, W, 2) flow vectors, got " +
              shape_str(field.vectors.shape));
    const int n = field.vectors.dim(0);
    const int h = field.vectors.dim(1);
    const int w = field.vectors.dim(2);

    MotionMask mm;
    mm.tau = tau;
    mm.mask = Tensor({n, h, w});
    Tensor plane({h, w, 2});
    for (int ti = 0; ti < n; ++ti) {
        std::memcpy(plane.ptr(), field.vectors.ptr() + static_cast<int64_t>(ti) * h * w * 2,
                    sizeof(float) * static_cast<size_t>(h) * w * 2);
        Tensor m = motion_mask(plane, tau);
        std::memcpy(mm.mask.ptr() + static_cast<int64_t>(ti) * h * w, m.ptr(),
                    sizeof(float) * static_cast<size_t>(h) * w);
    }
    return mm;
}

}  // namespace gvr
