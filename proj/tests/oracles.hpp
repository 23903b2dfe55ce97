// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference implementations for the test suite, kept deliberately naive and
// written directly from the defining formulas. They share no code with the
// library so an error has to be made twice to go unnoticed.

#include <cmath>
#include <functional>
#include <vector>

#include "gvr/tensor.hpp"

namespace oracle {

// 2D DCT-II straight from the double sum:
//   Y[u][v] = s_u s_v sum_{y,x} X[y][x] cos(pi(2y+1)u/2H) cos(pi(2x+1)v/2W)
inline gvr::Tensor dct2d_sum(const gvr::Tensor& x) {
    int h = x.dim(0), w = x.dim(1);
    gvr::Tensor out(gvr::Shape{h, w});
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            double su = std::sqrt((u == 0 ? 1.0 : 2.0) / h);
            double sv = std::sqrt((v == 0 ? 1.0 : 2.0) / w);
            double acc = 0.0;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    acc += x.at(y, xx) * std::cos(pi * (2 * y + 1) * u / (2.0 * h)) *
                           std::cos(pi * (2 * xx + 1) * v / (2.0 * w));
            out.at(u, v) = static_cast<float>(su * sv * acc);
        }
    return out;
}

// Quadruple-loop cross-correlation, x (Cin,H,W), k (Cout,Cin,kh,kw).
inline gvr::Tensor conv2d_loop(const gvr::Tensor& x, const gvr::Tensor& k, int stride, int pad) {
    int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    int cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w + 2 * pad - kw) / stride + 1;
    gvr::Tensor out(gvr::Shape{cout, oh, ow});
    for (int oc = 0; oc < cout; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ic = 0; ic < cin; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            int iy = oy * stride - pad + ky;
                            int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += static_cast<double>(x.at(ic, iy, ix)) * k.at(oc, ic, ky, kx);
                        }
                out.at(oc, oy, ox) = static_cast<float>(acc);
            }
    return out;
}

// x (Cin,T,H,W), k (Cout,Cin,kt,kh,kw).
inline gvr::Tensor conv3d_loop(const gvr::Tensor& x, const gvr::Tensor& k, int stride, int pad) {
    int cin = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
    int cout = k.dim(0), kt = k.dim(2), kh = k.dim(3), kw = k.dim(4);
    int ot = (t + 2 * pad - kt) / stride + 1;
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w + 2 * pad - kw) / stride + 1;
    gvr::Tensor out(gvr::Shape{cout, ot, oh, ow});
    for (int oc = 0; oc < cout; ++oc)
        for (int oz = 0; oz < ot; ++oz)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ic = 0; ic < cin; ++ic)
                        for (int kz = 0; kz < kt; ++kz)
                            for (int ky = 0; ky < kh; ++ky)
                                for (int kx = 0; kx < kw; ++kx) {
                                    int iz = oz * stride - pad + kz;
                                    int iy = oy * stride - pad + ky;
                                    int ix = ox * stride - pad + kx;
                                    if (iz < 0 || iz >= t || iy < 0 || iy >= h || ix < 0 ||
                                        ix >= w)
                                        continue;
                                    acc += static_cast<double>(x.at(ic, iz, iy, ix)) *
                                           k[((static_cast<int64_t>(oc) * cin + ic) * kt + kz) *
                                                 kh * kw +
                                             static_cast<int64_t>(ky) * kw + kx];
                                }
                    out[((static_cast<int64_t>(oc) * ot + oz) * oh + oy) * ow + ox] =
                        static_cast<float>(acc);
                }
    return out;
}

// Multi-head attention where query rows `q_idx` attend to key rows `kv_idx`,
// double-loop softmax in double precision. Writes only the q_idx rows of the
// returned (N, D) tensor.
inline void attention_group_loop(const gvr::Tensor& q, const gvr::Tensor& k, const gvr::Tensor& v,
                                 int heads, const std::vector<int>& q_idx,
                                 const std::vector<int>& kv_idx, gvr::Tensor& out) {
    int d = q.dim(1);
    int hd = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int h = 0; h < heads; ++h) {
        int off = h * hd;
        for (int qi : q_idx) {
            std::vector<double> s(kv_idx.size());
            double smax = -1e300;
            for (size_t j = 0; j < kv_idx.size(); ++j) {
                double acc = 0.0;
                for (int c = 0; c < hd; ++c)
                    acc += static_cast<double>(q.at(qi, off + c)) * k.at(kv_idx[j], off + c);
                s[j] = acc * scale;
                smax = std::max(smax, s[j]);
            }
            double denom = 0.0;
            for (double sv : s) denom += std::exp(sv - smax);
            for (int c = 0; c < hd; ++c) {
                double acc = 0.0;
                for (size_t j = 0; j < kv_idx.size(); ++j)
                    acc += std::exp(s[j] - smax) / denom * v.at(kv_idx[j], off + c);
                out.at(qi, off + c) = static_cast<float>(acc);
            }
        }
    }
}

// Full attention over all N tokens jointly.
inline gvr::Tensor attention_loop(const gvr::Tensor& q, const gvr::Tensor& k, const gvr::Tensor& v,
                                  int heads) {
    int n = q.dim(0);
    gvr::Tensor out(q.shape);
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    attention_group_loop(q, k, v, heads, all, all, out);
    return out;
}

// 3x3 Laplacian response variance on a luma plane scaled to [0,255]; the
// curation threshold is defined on that scale. Interior pixels only.
inline double laplacian_variance_loop(const gvr::Tensor& luma) {
    int h = luma.dim(0), w = luma.dim(1);
    std::vector<double> resp;
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            double c = 255.0 * luma.at(y, x);
            double r = 255.0 * (luma.at(y - 1, x) + luma.at(y + 1, x) + luma.at(y, x - 1) +
                                luma.at(y, x + 1)) -
                       4.0 * c;
            resp.push_back(r);
        }
    if (resp.empty()) return 0.0;
    double mu = 0.0;
    for (double r : resp) mu += r;
    mu /= static_cast<double>(resp.size());
    double var = 0.0;
    for (double r : resp) var += (r - mu) * (r - mu);
    return var / static_cast<double>(resp.size());
}

// Central finite differences against a scalar loss. Returns the largest
// per-parameter relative error  ||g_fd - g||_2 / max(||g_fd||_2, ||g||_2, eps).
inline double fd_relative_error(
    const std::function<double(const std::vector<gvr::Tensor>&)>& loss,
    const std::vector<gvr::Tensor>& params, const std::vector<gvr::Tensor>& grads,
    double h = 1e-3) {
    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        std::vector<gvr::Tensor> work = params;
        double diff2 = 0.0, fd2 = 0.0, an2 = 0.0;
        for (size_t i = 0; i < params[p].data.size(); ++i) {
            float orig = work[p].data[i];
            work[p].data[i] = static_cast<float>(orig + h);
            double lp = loss(work);
            work[p].data[i] = static_cast<float>(orig - h);
            double lm = loss(work);
            work[p].data[i] = orig;
            double g_fd = (lp - lm) / (2.0 * h);
            double g_an = grads[p].data[i];
            diff2 += (g_fd - g_an) * (g_fd - g_an);
            fd2 += g_fd * g_fd;
            an2 += g_an * g_an;
        }
        double denom = std::max({std::sqrt(fd2), std::sqrt(an2), 1e-8});
        worst = std::max(worst, std::sqrt(diff2) / denom);
    }
    return worst;
}

}  // namespace oracle
