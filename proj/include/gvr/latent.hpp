// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "gvr/clip.hpp"

namespace gvr {

// Space-time patchify factors standing in for the video VAE. The defaults
// give the latent length arithmetic Tl = 1 + (T-1)/4 (17 -> 5, 77 -> 20)
// and a fixed channel count Cl = 3 * fs^2 * ft = 768.
struct CodecDesc {
    int fs = 8;  // spatial fold
    int ft = 4;  // temporal fold (frame 0 encodes alone)

    int cl() const { return 3 * fs * fs * ft; }
};

// Latent video: (Tl, Cl, Hl, Wl). The codec is a pure permutation with zero
// padding on the first latent frame, so encode/decode are lossless.
struct Latent {
    Tensor data;
    CodecDesc codec;
    double frame_rate = 24.0;  // carried in memory only, not serialized

    int tl() const { return data.dim(0); }
    int cl() const { return data.dim(1); }
    int hl() const { return data.dim(2); }
    int wl() const { return data.dim(3); }
};

void validate_latent(const Latent& lat, const std::string& what);

// Latent frame count for a source clip length; (t - 1) must divide by ft.
int latent_frames_for(int t, int ft);

Latent encode(const Clip& clip, CodecDesc codec = {});
Clip decode(const Latent& lat);

// Bilinear resize of every channel plane per latent frame; upsampling only.
Latent upsample_condition(const Latent& lat, int target_hl, int target_wl);

// Flat binary container: magic "GVRL", version u32, then the four extents as
// little-endian u32, then the f32 payload row-major (24-byte header total).
void write_latent(const Latent& lat, const std::string& path);
Latent read_latent(const std::string& path);

}  // namespace gvr
