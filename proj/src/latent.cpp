// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/latent.hpp"

#include <cstring>
#include <filesystem>

#include "gvr/media_io.hpp"
#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"

namespace gvr {

void validate_latent(const Latent& lat, const std::string& what) {
    check(lat.data.ndim() == 4, what + ": latent must be (Tl, Cl, Hl, Wl)");
    check(lat.data.dim(1) == lat.codec.cl(),
          what + ": latent channel count " + std::to_string(lat.data.dim(1)) +
              " does not match codec Cl " + std::to_string(lat.codec.cl()));
}

int latent_frames_for(int t, int ft) {
    check(t >= 1, "clip must have at least one frame");
    check((t - 1) % ft == 0, "frame count " + std::to_string(t) + " invalid: T-1 = " +
                                 std::to_string(t - 1) + " must be divisible by " +
                                 std::to_string(ft));
    return 1 + (t - 1) / ft;
}

// Channel layout within one latent frame: ch = ((gi*3 + c)*fs + py)*fs + px,
// where gi indexes the frame inside its temporal group. Latent frame 0 holds
// a single source frame (gi = 0) and pads the remaining channels with zeros.
Latent encode(const Clip& clip, CodecDesc codec) {
    validate_clip(clip, "encode");
    int t = clip.t(), h = clip.h(), w = clip.w();
    check(h % codec.fs == 0 && w % codec.fs == 0,
          "frame size " + std::to_string(h) + "x" + std::to_string(w) +
              " invalid: H and W must be divisible by " + std::to_string(codec.fs));
    int tl = latent_frames_for(t, codec.ft);
    int hl = h / codec.fs, wl = w / codec.fs;
    int fs = codec.fs;

    Latent lat;
    lat.codec = codec;
    lat.frame_rate = clip.frame_rate;
    lat.data = Tensor::zeros(Shape{tl, codec.cl(), hl, wl});
    parallel_for(tl, [&](int64_t lt) {
        int group = lt == 0 ? 1 : codec.ft;
        int t0 = lt == 0 ? 0 : 1 + (static_cast<int>(lt) - 1) * codec.ft;
        for (int gi = 0; gi < group; ++gi)
            for (int c = 0; c < 3; ++c)
                for (int py = 0; py < fs; ++py)
                    for (int px = 0; px < fs; ++px) {
                        int ch = ((gi * 3 + c) * fs + py) * fs + px;
                        for (int ly = 0; ly < hl; ++ly)
                            for (int lx = 0; lx < wl; ++lx)
                                lat.data.at(static_cast<int>(lt), ch, ly, lx) =
                                    clip.px(t0 + gi, ly * fs + py, lx * fs + px, c);
                    }
    });
    return lat;
}

Clip decode(const Latent& lat) {
    validate_latent(lat, "decode");
    int tl = lat.tl(), hl = lat.hl(), wl = lat.wl();
    int fs = lat.codec.fs;
    int t = 1 + (tl - 1) * lat.codec.ft;
    Clip clip = make_clip(t, hl * fs, wl * fs, lat.frame_rate);
    parallel_for(tl, [&](int64_t lt) {
        int group = lt == 0 ? 1 : lat.codec.ft;
        int t0 = lt == 0 ? 0 : 1 + (static_cast<int>(lt) - 1) * lat.codec.ft;
        // Padding channels of latent frame 0 are ignored, so decoding a model
        // output (whose pads are merely near zero) stays well defined.
        for (int gi = 0; gi < group; ++gi)
            for (int c = 0; c < 3; ++c)
                for (int py = 0; py < fs; ++py)
                    for (int px = 0; px < fs; ++px) {
                        int ch = ((gi * 3 + c) * fs + py) * fs + px;
                        for (int ly = 0; ly < hl; ++ly)
                            for (int lx = 0; lx < wl; ++lx)
                                clip.px(t0 + gi, ly * fs + py, lx * fs + px, c) =
                                    lat.data.at(static_cast<int>(lt), ch, ly, lx);
                    }
    });
    return clip;
}

Latent upsample_condition(const Latent& lat, int target_hl, int target_wl) {
    validate_latent(lat, "upsample_condition");
    check(target_hl >= lat.hl() && target_wl >= lat.wl(),
          "upsample_condition: target " + std::to_string(target_hl) + "x" +
              std::to_string(target_wl) + " would downscale " + std::to_string(lat.hl()) + "x" +
              std::to_string(lat.wl()));
    Latent out = lat;
    if (target_hl == lat.hl() && target_wl == lat.wl()) return out;
    out.data = bilinear_resize(lat.data, target_hl, target_wl);
    return out;
}

// ---------------------------------------------------------------------------
// GVRL container
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<unsigned char>& v, uint32_t x) {
    v.push_back(static_cast<unsigned char>(x));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 24));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

constexpr uint32_t kGvrlVersion = 1;

}  // namespace

void write_latent(const Latent& lat, const std::string& path) {
    validate_latent(lat, "write_latent");
    std::vector<unsigned char> out;
    out.reserve(24 + lat.data.data.size() * 4);
    out.insert(out.end(), {'G', 'V', 'R', 'L'});
    put_u32(out, kGvrlVersion);
    for (int i = 0; i < 4; ++i) put_u32(out, static_cast<uint32_t>(lat.data.dim(i)));
    size_t payload = out.size();
    out.resize(payload + lat.data.data.size() * 4);
    static_assert(sizeof(float) == 4);
    std::memcpy(out.data() + payload, lat.data.data.data(), lat.data.data.size() * 4);
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    write_file_bytes(path, out.data(), out.size());
}

Latent read_latent(const std::string& path) {
    auto b = read_file_bytes(path);
    check(b.size() >= 24 && std::memcmp(b.data(), "GVRL", 4) == 0,
          "not a GVRL latent file: " + path);
    uint32_t version = get_u32(b.data() + 4);
    check(version == kGvrlVersion,
          "unsupported GVRL version " + std::to_string(version) + ": " + path);
    Shape shape(4);
    int64_t numel = 1;
    for (int i = 0; i < 4; ++i) {
        uint32_t e = get_u32(b.data() + 8 + 4 * i);
        check(e >= 1 && e <= (1u << 24), "bad GVRL extent: " + path);
        shape[static_cast<size_t>(i)] = static_cast<int>(e);
        numel *= e;
    }
    check(b.size() == 24 + static_cast<size_t>(numel) * 4,
          "GVRL payload length mismatch: " + path);
    Latent lat;
    lat.data = Tensor(shape);
    std::memcpy(lat.data.data.data(), b.data() + 24, static_cast<size_t>(numel) * 4);
    validate_latent(lat, path);
    return lat;
}

}  // namespace gvr
