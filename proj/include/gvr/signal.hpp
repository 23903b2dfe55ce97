// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gvr/tensor.hpp"

namespace gvr {

// ---------------------------------------------------------------------------
// Orthonormal 2D DCT-II. Direct matrix form; frames at this scale are small
// enough that no fast transform is warranted.
//
// Forward:  Y = D_H X D_W^T,  D_N[k][n] = s_k cos(pi (2n+1) k / (2N)),
// s_0 = sqrt(1/N), s_k = sqrt(2/N). Inverse is the transpose pair, so
// idct2d(dct2d(x)) == x and ||Y||_2 == ||X||_2 (Parseval).
// ---------------------------------------------------------------------------
Tensor dct2d(const Tensor& frame);   // frame: H x W
Tensor idct2d(const Tensor& coef);   // coef:  H x W

// ---------------------------------------------------------------------------
// Resampling. Coordinate convention is align-corners-false:
//   src = (dst + 0.5) * (src_size / dst_size) - 0.5, edges clamped.
// ---------------------------------------------------------------------------

// One H x W plane.
void bilinear_plane(const float* src, int h, int w, float* dst, int nh, int nw);
void bicubic_plane(const float* src, int h, int w, float* dst, int nh, int nw);

// x: T x C x H x W, resized per frame/channel.
Tensor bilinear_resize(const Tensor& x, int new_h, int new_w);

// Frames stored T x H x W x C (clip layout).
Tensor bilinear_resize_thwc(const Tensor& x, int new_h, int new_w);
// Catmull-Rom cubic; the one-order degradation downsampler.
Tensor bicubic_resize_thwc(const Tensor& x, int new_h, int new_w);

// Rec.601 luma (0.299 R + 0.587 G + 0.114 B) of an (H, W, 3) frame.
Tensor rec601_luma(const Tensor& frame);

// ---------------------------------------------------------------------------
// Cross-correlation ("convolution" in NN usage).
//   conv2d: x (Cin,H,W),   k (Cout,Cin,kh,kw)
//   conv3d: x (Cin,T,H,W), k (Cout,Cin,kt,kh,kw)
// pad is symmetric zero padding; kernel extents must be odd when callers use
// pad = extent/2 for same-size output.
// ---------------------------------------------------------------------------
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride = 1, int pad = 0);
Tensor conv3d(const Tensor& x, const Tensor& kernel, int stride = 1, int pad = 0);

}  // namespace gvr
