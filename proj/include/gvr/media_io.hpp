// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gvr/clip.hpp"

namespace gvr {

// ---------------------------------------------------------------------------
// 8-bit quantization. Round half up; dequantization divides by 255 so a
// write/read round trip is exact at 8-bit resolution.
// ---------------------------------------------------------------------------
unsigned char quantize8(float v);
inline float dequantize8(unsigned char b) { return static_cast<float>(b) / 255.0f; }

// ---------------------------------------------------------------------------
// Still images, (H, W, 3) in [0,1]. Format chosen by extension
// (.ppm binary P6, .png 8-bit RGB).
// ---------------------------------------------------------------------------
Tensor read_image(const std::string& path);
void write_image(const Tensor& image, const std::string& path);

// ---------------------------------------------------------------------------
// Clips. A path ending in .y4m is a YUV4MPEG2 stream restricted to C444 with
// the repo's RGB-as-planes convention (plane order R, G, B -- no colour
// transform). Any other path is a directory of numbered frames 0001.ppm ...
// (or .png via `frame_ext`); read_clip accepts either extension.
// ---------------------------------------------------------------------------
Clip read_clip(const std::string& path);
void write_clip(const Clip& clip, const std::string& path, const std::string& frame_ext = "ppm");

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180 quoting, '\n' line ends, header row first. Empty tables and
// ragged rows are rejected.
void emit_report(const CsvTable& table, const std::string& path);
std::string csv_quote(const std::string& field);
CsvTable read_report(const std::string& path);

// Shortest round-trippable decimal (locale independent).
std::string fmt_num(double v);

// Minimal SVG 1.1 line plot: xs against ys, y axis pointing up (larger ys
// plot higher, i.e. smaller SVG y coordinates). Byte-deterministic.
void emit_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& path, const std::string& title = "");

// Whole-file helpers (binary).
std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, size_t n);

}  // namespace gvr
