// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/signal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gvr/parallel.hpp"

namespace gvr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// D_N[k][n], orthonormal.
std::vector<double> dct_matrix(int n) {
    std::vector<double> m(static_cast<size_t>(n) * n);
    double s0 = std::sqrt(1.0 / n);
    double sk = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            m[static_cast<size_t>(k) * n + j] =
                (k == 0 ? s0 : sk) * std::cos(kPi * (2 * j + 1) * k / (2.0 * n));
    return m;
}

void check_2d(const Tensor& x, const char* op) {
    check(x.ndim() == 2, std::string(op) + ": expected a 2D H x W tensor, got " +
                             shape_str(x.shape));
}

// out = A * X * B^T in double, A (h x h), B (w x w), X (h x w).
Tensor sandwich(const Tensor& x, const std::vector<double>& a, const std::vector<double>& b,
                bool transpose_a, bool transpose_b) {
    int h = x.dim(0), w = x.dim(1);
    std::vector<double> tmp(static_cast<size_t>(h) * w, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = 0; k < h; ++k) {
                double aik = transpose_a ? a[static_cast<size_t>(k) * h + i]
                                         : a[static_cast<size_t>(i) * h + k];
                acc += aik * x.at(k, j);
            }
            tmp[static_cast<size_t>(i) * w + j] = acc;
        }
    Tensor out(Shape{h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = 0; k < w; ++k) {
                double bjk = transpose_b ? b[static_cast<size_t>(k) * w + j]
                                         : b[static_cast<size_t>(j) * w + k];
                acc += tmp[static_cast<size_t>(i) * w + k] * bjk;
            }
            out.at(i, j) = static_cast<float>(acc);
        }
    return out;
}

}  // namespace

Tensor dct2d(const Tensor& frame) {
    check_2d(frame, "dct2d");
    auto dh = dct_matrix(frame.dim(0));
    auto dw = dct_matrix(frame.dim(1));
    // Y = D_H X D_W^T
    return sandwich(frame, dh, dw, false, false);
}

Tensor idct2d(const Tensor& coef) {
    check_2d(coef, "idct2d");
    auto dh = dct_matrix(coef.dim(0));
    auto dw = dct_matrix(coef.dim(1));
    // X = D_H^T Y D_W
    return sandwich(coef, dh, dw, true, true);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

void bilinear_plane(const float* src, int h, int w, float* dst, int nh, int nw) {
    double sy = static_cast<double>(h) / nh;
    double sx = static_cast<double>(w) / nw;
    for (int y = 0; y < nh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, h - 1);
        int y1c = std::clamp(y0 + 1, 0, h - 1);
        for (int x = 0; x < nw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, w - 1);
            int x1c = std::clamp(x0 + 1, 0, w - 1);
            double top = (1.0 - wx) * src[static_cast<size_t>(y0c) * w + x0c] +
                         wx * src[static_cast<size_t>(y0c) * w + x1c];
            double bot = (1.0 - wx) * src[static_cast<size_t>(y1c) * w + x0c] +
                         wx * src[static_cast<size_t>(y1c) * w + x1c];
            dst[static_cast<size_t>(y) * nw + x] = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
}

namespace {

// Catmull-Rom (a = -0.5)
inline double cubic_w(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

}  // namespace

void bicubic_plane(const float* src, int h, int w, float* dst, int nh, int nw) {
    double sy = static_cast<double>(h) / nh;
    double sx = static_cast<double>(w) / nw;
    for (int y = 0; y < nh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double ty = fy - y0;
        double wy[4];
        for (int i = 0; i < 4; ++i) wy[i] = cubic_w(ty - (i - 1));
        for (int x = 0; x < nw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double tx = fx - x0;
            double wx[4];
            for (int i = 0; i < 4; ++i) wx[i] = cubic_w(tx - (i - 1));
            double acc = 0.0, norm = 0.0;
            for (int i = 0; i < 4; ++i) {
                int yy = std::clamp(y0 - 1 + i, 0, h - 1);
                for (int j = 0; j < 4; ++j) {
                    int xx = std::clamp(x0 - 1 + j, 0, w - 1);
                    double wgt = wy[i] * wx[j];
                    acc += wgt * src[static_cast<size_t>(yy) * w + xx];
                    norm += wgt;
                }
            }
            dst[static_cast<size_t>(y) * nw + x] = static_cast<float>(acc / norm);
        }
    }
}

Tensor bilinear_resize(const Tensor& x, int new_h, int new_w) {
    check(x.ndim() == 4, "bilinear_resize: expected T x C x H x W, got " + shape_str(x.shape));
    check(new_h >= 1 && new_w >= 1, "bilinear_resize: target extents must be >= 1");
    int t = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (new_h == h && new_w == w) return x;
    Tensor out(Shape{t, c, new_h, new_w});
    int64_t planes = static_cast<int64_t>(t) * c;
    parallel_for(planes, [&](int64_t p) {
        const float* src = x.ptr() + p * h * w;
        float* dst = out.ptr() + p * new_h * new_w;
        bilinear_plane(src, h, w, dst, new_h, new_w);
    });
    return out;
}

namespace {

// T x H x W x C resize helper: de-interleaves channels, resizes planes.
template <typename PlaneFn>
Tensor resize_thwc(const Tensor& x, int new_h, int new_w, PlaneFn plane) {
    check(x.ndim() == 4, "resize: expected T x H x W x C, got " + shape_str(x.shape));
    int t = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor out(Shape{t, new_h, new_w, c});
    parallel_for(static_cast<int64_t>(t) * c, [&](int64_t idx) {
        int fr = static_cast<int>(idx / c);
        int ch = static_cast<int>(idx % c);
        std::vector<float> src(static_cast<size_t>(h) * w);
        std::vector<float> dst(static_cast<size_t>(new_h) * new_w);
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) src[static_cast<size_t>(y) * w + xx] = x.at(fr, y, xx, ch);
        plane(src.data(), h, w, dst.data(), new_h, new_w);
        for (int y = 0; y < new_h; ++y)
            for (int xx = 0; xx < new_w; ++xx)
                out.at(fr, y, xx, ch) = dst[static_cast<size_t>(y) * new_w + xx];
    });
    return out;
}

}  // namespace

Tensor bilinear_resize_thwc(const Tensor& x, int new_h, int new_w) {
    return resize_thwc(x, new_h, new_w, bilinear_plane);
}

Tensor bicubic_resize_thwc(const Tensor& x, int new_h, int new_w) {
    return resize_thwc(x, new_h, new_w, bicubic_plane);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int pad) {
    check(x.ndim() == 3, "conv2d: input must be Cin x H x W, got " + shape_str(x.shape));
    check(kernel.ndim() == 4, "conv2d: kernel must be Cout x Cin x kh x kw");
    check(x.dim(0) == kernel.dim(1), "conv2d: channel mismatch, input Cin=" +
                                         std::to_string(x.dim(0)) + " kernel Cin=" +
                                         std::to_string(kernel.dim(1)));
    check(stride >= 1, "conv2d: stride must be >= 1");
    int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w + 2 * pad - kw) / stride + 1;
    check(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");
    Tensor out(Shape{cout, oh, ow});
    parallel_for(cout, [&](int64_t oc) {
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ic = 0; ic < cin; ++ic)
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += static_cast<double>(x.at(ic, iy, ix)) *
                                   kernel.at(static_cast<int>(oc), ic, ky, kx);
                        }
                    }
                out.at(static_cast<int>(oc), oy, ox) = static_cast<float>(acc);
            }
    });
    return out;
}

Tensor conv3d(const Tensor& x, const Tensor& kernel, int stride, int pad) {
    check(x.ndim() == 4, "conv3d: input must be Cin x T x H x W, got " + shape_str(x.shape));
    check(kernel.ndim() == 5, "conv3d: kernel must be Cout x Cin x kt x kh x kw");
    check(x.dim(0) == kernel.dim(1), "conv3d: channel mismatch, input Cin=" +
                                         std::to_string(x.dim(0)) + " kernel Cin=" +
                                         std::to_string(kernel.dim(1)));
    check(stride >= 1, "conv3d: stride must be >= 1");
    int cin = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
    int cout = kernel.dim(0), kt = kernel.dim(2), kh = kernel.dim(3), kw = kernel.dim(4);
    int ot = (t + 2 * pad - kt) / stride + 1;
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w + 2 * pad - kw) / stride + 1;
    check(ot >= 1 && oh >= 1 && ow >= 1, "conv3d: kernel larger than padded input");
    Tensor out(Shape{cout, ot, oh, ow});
    parallel_for(cout, [&](int64_t oc) {
        for (int oz = 0; oz < ot; ++oz)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ic = 0; ic < cin; ++ic)
                        for (int kz = 0; kz < kt; ++kz) {
                            int iz = oz * stride - pad + kz;
                            if (iz < 0 || iz >= t) continue;
                            for (int ky = 0; ky < kh; ++ky) {
                                int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    acc += static_cast<double>(x.at(ic, iz, iy, ix)) *
                                           kernel.data[(((static_cast<size_t>(oc) * cin + ic) * kt +
                                                         kz) *
                                                            kh +
                                                        ky) *
                                                           kw +
                                                       kx];
                                }
                            }
                        }
                    out.at(static_cast<int>(oc), oz, oy, ox) = static_cast<float>(acc);
                }
    });
    return out;
}

Tensor rec601_luma(const Tensor& frame) {
    check(frame.ndim() == 3 && frame.dim(2) == 3, "rec601_luma: need an (H, W, 3) frame");
    int h = frame.dim(0), w = frame.dim(1);
    Tensor out(Shape{h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x) = 0.299f * frame.at(y, x, 0) + 0.587f * frame.at(y, x, 1) +
                           0.114f * frame.at(y, x, 2);
    return out;
}

}  // namespace gvr
