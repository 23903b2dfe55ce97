// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gvr/media_io.hpp"
#include "gvr/rng.hpp"

using namespace gvr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "gvrlab_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Clip random_clip(Rng& rng, int t, int h, int w) {
    Clip c = make_clip(t, h, w);
    c.frames = rand_uniform(rng, Shape{t, h, w, 3});
    return c;
}

}  // namespace

TEST_CASE("quantize8 rounds half up and inverts exactly") {
    CHECK(quantize8(0.0f) == 0);
    CHECK(quantize8(1.0f) == 255);
    CHECK(quantize8(-2.0f) == 0);
    CHECK(quantize8(2.0f) == 255);
    // 0.5/255 is the rounding boundary for byte 1
    CHECK(quantize8(0.4999f / 255.0f) == 0);
    CHECK(quantize8(0.5001f / 255.0f) == 1);
    for (int b = 0; b < 256; ++b)
        CHECK(quantize8(dequantize8(static_cast<unsigned char>(b))) == b);
}

TEST_CASE("clip round trip stays within the 8-bit bound for all containers") {
    auto dir = scratch_dir("roundtrip");
    Rng rng(100, 0);
    for (int trial = 0; trial < 100; ++trial) {
        Clip c = random_clip(rng, 2, 4, 6);
        std::string path;
        switch (trial % 3) {
            case 0: path = (dir / ("c" + std::to_string(trial) + ".y4m")).string(); break;
            case 1: path = (dir / ("d" + std::to_string(trial))).string(); break;
            default: path = (dir / ("p" + std::to_string(trial))).string(); break;
        }
        write_clip(c, path, trial % 3 == 2 ? "png" : "ppm");
        Clip back = read_clip(path);
        CHECK(back.t() == c.t());
        CHECK(max_abs_diff(back.frames, c.frames) <= 1.0 / 255.0);
        for (float v : back.frames.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("8-bit-exact clips survive ppm and y4m byte-for-byte") {
    auto dir = scratch_dir("lossless");
    Rng rng(101, 0);
    Clip c = make_clip(3, 4, 4);
    for (auto& v : c.frames.data)
        v = dequantize8(static_cast<unsigned char>(rng.below(256)));
    write_clip(c, (dir / "a.y4m").string());
    Clip back = read_clip((dir / "a.y4m").string());
    CHECK(back.frames.data == c.frames.data);
    write_clip(back, (dir / "b.y4m").string());
    CHECK(read_file_bytes((dir / "a.y4m").string()) == read_file_bytes((dir / "b.y4m").string()));
}

TEST_CASE("directory of seventeen frames loads as a 17-frame clip") {
    auto dir = scratch_dir("frames17");
    Rng rng(102, 0);
    Clip c = random_clip(rng, 17, 4, 4);
    write_clip(c, dir.string());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    CHECK(names.front() == "0001.ppm");
    CHECK(names.back() == "0017.ppm");
    Clip back = read_clip(dir.string());
    CHECK(back.t() == 17);
}

TEST_CASE("y4m C420 is rejected with an explicit unsupported-format error") {
    auto dir = scratch_dir("y4m420");
    std::string body = "YUV4MPEG2 W4 H4 F25:1 Ip A1:1 C420\nFRAME\n";
    body.resize(body.size() + 4 * 4 * 3 / 2, '\0');
    write_file_bytes((dir / "bad.y4m").string(), body.data(), body.size());
    CHECK_THROWS_WITH_AS(read_clip((dir / "bad.y4m").string()),
                         doctest::Contains("unsupported y4m colourspace"), ValidationError);
}

TEST_CASE("inconsistent frame sizes name the offending frame") {
    auto dir = scratch_dir("ragged");
    Rng rng(103, 0);
    Clip a = random_clip(rng, 1, 4, 4);
    Clip b = random_clip(rng, 1, 6, 6);
    write_clip(a, dir.string());
    // Overwrite the second slot with a larger frame.
    Tensor big(Shape{6, 6, 3});
    big = rand_uniform(rng, Shape{6, 6, 3});
    write_image(big, (dir / "0002.ppm").string());
    CHECK_THROWS_WITH_AS(read_clip(dir.string()), doctest::Contains("0002.ppm"), ValidationError);
    (void)b;
}

TEST_CASE("png writer output is readable and unsupported pngs are refused") {
    auto dir = scratch_dir("png");
    Rng rng(104, 0);
    Tensor img = rand_uniform(rng, Shape{5, 7, 3});
    write_image(img, (dir / "x.png").string());
    Tensor back = read_image((dir / "x.png").string());
    CHECK(max_abs_diff(back, img) <= 1.0 / 255.0);

    // Grayscale PNG (colour type 0) must be rejected by name.
    auto bytes = read_file_bytes((dir / "x.png").string());
    bytes[8 + 8 + 9] = 0;  // IHDR colour type byte
    write_file_bytes((dir / "gray.png").string(), bytes.data(), bytes.size());
    CHECK_THROWS_WITH_AS(read_image((dir / "gray.png").string()),
                         doctest::Contains("unsupported PNG format"), ValidationError);
}

TEST_CASE("csv: header plus rows with RFC-4180 quoting") {
    auto dir = scratch_dir("csv");
    CsvTable t;
    t.columns = {"step", "note"};
    t.rows = {{"1", "plain"}, {"2", "a,b \"quoted\"\nline"}};
    auto path = (dir / "r.csv").string();
    emit_report(t, path);
    auto bytes = read_file_bytes(path);
    std::string text(bytes.begin(), bytes.end());
    CHECK(text == "step,note\n1,plain\n2,\"a,b \"\"quoted\"\"\nline\"\n");
    CsvTable back = read_report(path);
    CHECK(back.columns == t.columns);
    CHECK(back.rows == t.rows);

    CsvTable empty;
    empty.columns = {"a"};
    CHECK_THROWS_AS(emit_report(empty, path), ValidationError);
}

TEST_CASE("csv and svg are byte-deterministic") {
    auto dir = scratch_dir("det");
    CsvTable t;
    t.columns = {"x", "y"};
    t.rows = {{"0", "1.5"}, {"1", "2.25"}};
    emit_report(t, (dir / "a.csv").string());
    emit_report(t, (dir / "b.csv").string());
    CHECK(read_file_bytes((dir / "a.csv").string()) == read_file_bytes((dir / "b.csv").string()));

    std::vector<double> xs = {0, 1, 2, 3}, ys = {0.1, 0.4, 0.9, 1.6};
    emit_curve(xs, ys, (dir / "a.svg").string(), "curve");
    emit_curve(xs, ys, (dir / "b.svg").string(), "curve");
    CHECK(read_file_bytes((dir / "a.svg").string()) == read_file_bytes((dir / "b.svg").string()));
}

TEST_CASE("svg: monotone data yields monotone inverted y coordinates") {
    auto dir = scratch_dir("svg");
    std::vector<double> xs = {0, 1, 2, 3, 4};
    std::vector<double> ys = {1, 2, 4, 8, 16};  // increasing
    auto path = (dir / "m.svg").string();
    emit_curve(xs, ys, path);
    auto bytes = read_file_bytes(path);
    std::string text(bytes.begin(), bytes.end());
    CHECK(text.find("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\"") !=
          std::string::npos);
    size_t p = text.find("points=\"");
    REQUIRE(p != std::string::npos);
    size_t e = text.find('"', p + 8);
    std::string pts = text.substr(p + 8, e - p - 8);
    // Parse "x,y x,y ..." and check y strictly decreases (SVG y grows down).
    std::istringstream ss(pts);
    std::string pair;
    double prev_y = 1e9;
    int count = 0;
    while (ss >> pair) {
        size_t comma = pair.find(',');
        double y = std::stod(pair.substr(comma + 1));
        CHECK(y < prev_y);
        prev_y = y;
        ++count;
    }
    CHECK(count == 5);
}
