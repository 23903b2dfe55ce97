// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "gvr/latent.hpp"
#include "gvr/media_io.hpp"
#include "gvr/rng.hpp"

using namespace gvr;
namespace fs = std::filesystem;

namespace {

Clip random_clip(Rng& rng, int t, int h, int w) {
    Clip c = make_clip(t, h, w);
    c.frames = rand_uniform(rng, Shape{t, h, w, 3});
    return c;
}

}  // namespace

TEST_CASE("latent lengths: 17 frames give 5 latents, 77 give 20") {
    CHECK(latent_frames_for(17, 4) == 5);
    CHECK(latent_frames_for(77, 4) == 20);
    Rng rng(200, 0);
    Clip c = random_clip(rng, 17, 16, 16);
    Latent lat = encode(c);
    CHECK(lat.tl() == 5);
    CHECK(lat.cl() == 768);
    CHECK(lat.hl() == 2);
    CHECK(lat.wl() == 2);
}

TEST_CASE("latent length law holds across the valid frame counts") {
    for (int t = 5; t <= 77; t += 4) CHECK(latent_frames_for(t, 4) == 1 + (t - 1) / 4);
}

TEST_CASE("encode/decode round trip is bitwise") {
    Rng rng(201, 0);
    for (int t : {1, 5, 17}) {
        Clip c = random_clip(rng, t, 16, 24);
        Clip back = decode(encode(c));
        CHECK(back.frames.data == c.frames.data);
        CHECK(back.t() == t);
    }
}

TEST_CASE("invalid frame counts and sizes are rejected with the divisibility rule") {
    Rng rng(202, 0);
    Clip c16 = random_clip(rng, 16, 16, 16);
    CHECK_THROWS_WITH_AS(encode(c16), doctest::Contains("divisible by 4"), ValidationError);
    Clip odd = random_clip(rng, 5, 20, 16);
    CHECK_THROWS_WITH_AS(encode(odd), doctest::Contains("divisible by 8"), ValidationError);
}

TEST_CASE("first latent frame pads its tail channels with zeros") {
    Rng rng(203, 0);
    Clip c = random_clip(rng, 5, 16, 16);
    Latent lat = encode(c);
    // Only channels [0, 192) carry frame 0; the rest must be zero.
    for (int ch = 192; ch < 768; ++ch)
        for (int ly = 0; ly < lat.hl(); ++ly)
            for (int lx = 0; lx < lat.wl(); ++lx) CHECK(lat.data.at(0, ch, ly, lx) == 0.0f);
    // Later latent frames use the full channel budget.
    double tail = 0.0;
    for (int ch = 192; ch < 768; ++ch) tail += std::fabs(lat.data.at(1, ch, 0, 0));
    CHECK(tail > 0.0);
}

TEST_CASE("upsample_condition: identity, constants, and the 2x ramp table") {
    Latent lat;
    lat.data = Tensor::zeros(Shape{1, 768, 2, 2});
    lat.data.at(0, 0, 0, 0) = 0.0f;
    lat.data.at(0, 0, 0, 1) = 1.0f;
    lat.data.at(0, 0, 1, 0) = 2.0f;
    lat.data.at(0, 0, 1, 1) = 3.0f;
    for (int ly = 0; ly < 2; ++ly)
        for (int lx = 0; lx < 2; ++lx) lat.data.at(0, 5, ly, lx) = 0.75f;

    Latent same = upsample_condition(lat, 2, 2);
    CHECK(same.data.data == lat.data.data);

    Latent up = upsample_condition(lat, 4, 4);
    std::vector<float> want = {0.0f, 0.25f, 0.75f, 1.0f,  0.5f, 0.75f, 1.25f, 1.5f,
                               1.5f, 1.75f, 2.25f, 2.5f,  2.0f, 2.25f, 2.75f, 3.0f};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(up.data.at(0, 0, y, x) ==
                  doctest::Approx(want[static_cast<size_t>(y * 4 + x)]).epsilon(1e-6));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(up.data.at(0, 5, y, x) == doctest::Approx(0.75f));

    CHECK_THROWS_WITH_AS(upsample_condition(up, 2, 2), doctest::Contains("downscale"),
                         ValidationError);
}

TEST_CASE("gvrl container round trips bitwise with the documented header") {
    Rng rng(204, 0);
    Clip c = random_clip(rng, 17, 16, 16);
    Latent lat = encode(c);
    fs::path dir = fs::temp_directory_path() / "gvrlab_tests" / "gvrl";
    fs::create_directories(dir);
    std::string path = (dir / "x.gvrl").string();
    write_latent(lat, path);

    auto bytes = read_file_bytes(path);
    REQUIRE(bytes.size() == 24 + lat.data.data.size() * 4);
    CHECK(bytes[0] == 'G');
    CHECK(bytes[1] == 'V');
    CHECK(bytes[2] == 'R');
    CHECK(bytes[3] == 'L');
    CHECK(bytes[4] == 1);  // version 1 little-endian
    CHECK(bytes[5] == 0);
    auto u32at = [&](size_t off) {
        return static_cast<uint32_t>(bytes[off]) | (static_cast<uint32_t>(bytes[off + 1]) << 8) |
               (static_cast<uint32_t>(bytes[off + 2]) << 16) |
               (static_cast<uint32_t>(bytes[off + 3]) << 24);
    };
    CHECK(u32at(8) == 5u);
    CHECK(u32at(12) == 768u);
    CHECK(u32at(16) == 2u);
    CHECK(u32at(20) == 2u);

    Latent back = read_latent(path);
    CHECK(back.data.data == lat.data.data);
    CHECK(decode(back).frames.data == c.frames.data);
}
