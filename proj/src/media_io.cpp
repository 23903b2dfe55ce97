// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/media_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace gvr {

Clip make_clip(int t, int h, int w, double fps) {
    Clip c(Tensor::zeros(Shape{t, h, w, 3}), fps);
    validate_clip(c, "make_clip");
    return c;
}

void validate_clip(const Clip& clip, const std::string& what) {
    check(clip.frames.ndim() == 4, what + ": clip must be (T, H, W, C)");
    check(clip.frames.dim(3) == 3, what + ": clip must have 3 channels");
    check(clip.t() >= 1, what + ": clip needs at least one frame");
    check(clip.h() % 2 == 0 && clip.w() % 2 == 0, what + ": frame extents must be even");
    check(clip.frame_rate > 0.0, what + ": frame rate must be positive");
}

Clip clamp01(const Clip& clip) {
    Clip out = clip;
    for (auto& v : out.frames.data) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

unsigned char quantize8(float v) {
    float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::floor(c * 255.0f + 0.5f));
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_runtime(in.good(), "cannot open for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const void* data, size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check_runtime(out.good(), "cannot open for writing: " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    check_runtime(out.good(), "short write: " + path);
}

// ---------------------------------------------------------------------------
// PPM (binary P6)
// ---------------------------------------------------------------------------

namespace {

// Skips whitespace and '#' comments, then reads one unsigned decimal token.
size_t ppm_token(const std::vector<unsigned char>& b, size_t pos, long& value,
                 const std::string& path) {
    while (pos < b.size()) {
        if (std::isspace(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    check(pos < b.size() && std::isdigit(b[pos]), "malformed PPM header: " + path);
    value = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        value = value * 10 + (b[pos] - '0');
        ++pos;
    }
    return pos;
}

Tensor read_ppm(const std::string& path) {
    auto b = read_file_bytes(path);
    check(b.size() > 2 && b[0] == 'P' && b[1] == '6', "not a binary P6 PPM: " + path);
    long w = 0, h = 0, maxval = 0;
    size_t pos = 2;
    pos = ppm_token(b, pos, w, path);
    pos = ppm_token(b, pos, h, path);
    pos = ppm_token(b, pos, maxval, path);
    check(maxval == 255, "unsupported PPM bit depth (maxval " + std::to_string(maxval) +
                             "): " + path);
    check(pos < b.size() && std::isspace(b[pos]), "malformed PPM header: " + path);
    ++pos;  // single whitespace before raster
    size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
    check(b.size() - pos >= need, "truncated PPM raster: " + path);
    Tensor img(Shape{static_cast<int>(h), static_cast<int>(w), 3});
    for (size_t i = 0; i < need; ++i) img.data[i] = dequantize8(b[pos + i]);
    return img;
}

void write_ppm(const Tensor& img, const std::string& path) {
    int h = img.dim(0), w = img.dim(1);
    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<unsigned char> out(header.size() + static_cast<size_t>(h) * w * 3);
    std::memcpy(out.data(), header.data(), header.size());
    for (size_t i = 0; i < static_cast<size_t>(h) * w * 3; ++i)
        out[header.size() + i] = quantize8(img.data[i]);
    write_file_bytes(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// PNG (8-bit RGB, colour type 2)
// ---------------------------------------------------------------------------

void be32(std::vector<unsigned char>& v, uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

uint32_t rd32(const unsigned char* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void png_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    be32(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(4 + data.size()));
    be32(out, static_cast<uint32_t>(crc));
}

const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void write_png(const Tensor& img, const std::string& path) {
    int h = img.dim(0), w = img.dim(1);
    // Raw scanlines, filter byte 0 per row.
    std::vector<unsigned char> raw(static_cast<size_t>(h) * (static_cast<size_t>(w) * 3 + 1));
    size_t p = 0;
    for (int y = 0; y < h; ++y) {
        raw[p++] = 0;
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) raw[p++] = quantize8(img.at(y, x, c));
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> z(zlen);
    int rc = compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9);
    check_runtime(rc == Z_OK, "zlib compression failed for " + path);
    z.resize(zlen);

    std::vector<unsigned char> out(kPngSig, kPngSig + 8);
    std::vector<unsigned char> ihdr;
    be32(ihdr, static_cast<uint32_t>(w));
    be32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // colour type: truecolour
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", z);
    png_chunk(out, "IEND", {});
    write_file_bytes(path, out.data(), out.size());
}

Tensor read_png(const std::string& path) {
    auto b = read_file_bytes(path);
    check(b.size() > 8 && std::memcmp(b.data(), kPngSig, 8) == 0, "not a PNG file: " + path);
    size_t pos = 8;
    uint32_t w = 0, h = 0;
    int depth = 0, colour = -1, interlace = 0;
    std::vector<unsigned char> idat;
    while (pos + 8 <= b.size()) {
        uint32_t len = rd32(b.data() + pos);
        check(pos + 12 + len <= b.size(), "truncated PNG chunk: " + path);
        const char* type = reinterpret_cast<const char*>(b.data() + pos + 4);
        const unsigned char* data = b.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            check(len == 13, "bad IHDR: " + path);
            w = rd32(data);
            h = rd32(data + 4);
            depth = data[8];
            colour = data[9];
            interlace = data[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    check(w > 0 && h > 0, "PNG missing IHDR: " + path);
    check(depth == 8 && colour == 2,
          "unsupported PNG format (need 8-bit RGB, got depth " + std::to_string(depth) +
              " colour type " + std::to_string(colour) + "): " + path);
    check(interlace == 0, "interlaced PNG not supported: " + path);

    size_t stride = static_cast<size_t>(w) * 3;
    std::vector<unsigned char> raw(static_cast<size_t>(h) * (stride + 1));
    uLongf rawlen = static_cast<uLongf>(raw.size());
    int rc = uncompress(raw.data(), &rawlen, idat.data(), static_cast<uLong>(idat.size()));
    check(rc == Z_OK && rawlen == raw.size(), "corrupt PNG pixel data: " + path);

    // Undo per-row filtering (types 0-4), 3 bytes per pixel.
    std::vector<unsigned char> pix(static_cast<size_t>(h) * stride);
    for (uint32_t y = 0; y < h; ++y) {
        unsigned char f = raw[static_cast<size_t>(y) * (stride + 1)];
        const unsigned char* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
        unsigned char* dst = pix.data() + static_cast<size_t>(y) * stride;
        const unsigned char* up = y ? pix.data() + static_cast<size_t>(y - 1) * stride : nullptr;
        check(f <= 4, "bad PNG filter type: " + path);
        for (size_t x = 0; x < stride; ++x) {
            int a = x >= 3 ? dst[x - 3] : 0;
            int bb = up ? up[x] : 0;
            int c = (up && x >= 3) ? up[x - 3] : 0;
            int v = src[x];
            switch (f) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += bb; break;
                case 3: v += (a + bb) / 2; break;
                case 4: {
                    int pp = a + bb - c;
                    int pa = std::abs(pp - a), pb = std::abs(pp - bb), pc = std::abs(pp - c);
                    v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? bb : c);
                    break;
                }
            }
            dst[x] = static_cast<unsigned char>(v & 0xff);
        }
    }
    Tensor img(Shape{static_cast<int>(h), static_cast<int>(w), 3});
    for (size_t i = 0; i < pix.size(); ++i) img.data[i] = dequantize8(pix[i]);
    return img;
}

// ---------------------------------------------------------------------------
// y4m (C444 only, planes carried as R, G, B)
// ---------------------------------------------------------------------------

void write_y4m(const Clip& clip, const std::string& path) {
    int t = clip.t(), h = clip.h(), w = clip.w();
    long num, den;
    double fps = clip.frame_rate;
    if (std::fabs(fps - std::round(fps)) < 1e-9) {
        num = static_cast<long>(std::llround(fps));
        den = 1;
    } else {
        num = static_cast<long>(std::llround(fps * 1000.0));
        den = 1000;
    }
    std::string header = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F" +
                         std::to_string(num) + ":" + std::to_string(den) + " Ip A1:1 C444\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    size_t plane = static_cast<size_t>(h) * w;
    out.reserve(out.size() + static_cast<size_t>(t) * (6 + 3 * plane));
    for (int f = 0; f < t; ++f) {
        const char* fh = "FRAME\n";
        out.insert(out.end(), fh, fh + 6);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.push_back(quantize8(clip.px(f, y, x, c)));
    }
    write_file_bytes(path, out.data(), out.size());
}

Clip read_y4m(const std::string& path) {
    auto b = read_file_bytes(path);
    size_t eol = 0;
    while (eol < b.size() && b[eol] != '\n') ++eol;
    check(eol < b.size(), "missing y4m header line: " + path);
    std::string header(b.begin(), b.begin() + static_cast<long>(eol));
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    check(magic == "YUV4MPEG2", "not a y4m stream: " + path);
    int w = -1, h = -1;
    long num = 25, den = 1;
    std::string colour;  // empty means the y4m default (4:2:0), which we reject
    std::string tok;
    while (hs >> tok) {
        if (tok.size() < 2) continue;
        char tag = tok[0];
        std::string val = tok.substr(1);
        if (tag == 'W') w = std::stoi(val);
        else if (tag == 'H') h = std::stoi(val);
        else if (tag == 'F') {
            size_t colon = val.find(':');
            check(colon != std::string::npos, "bad y4m frame rate: " + path);
            num = std::stol(val.substr(0, colon));
            den = std::stol(val.substr(colon + 1));
        } else if (tag == 'C') {
            colour = val;
        }
    }
    check(w > 0 && h > 0, "y4m header missing W/H: " + path);
    check(colour == "444", "unsupported y4m colourspace '" +
                               (colour.empty() ? std::string("420 (default)") : colour) +
                               "' (only C444 is supported): " + path);
    check(den > 0 && num > 0, "bad y4m frame rate: " + path);

    size_t plane = static_cast<size_t>(h) * w;
    size_t pos = eol + 1;
    std::vector<float> frames;
    int t = 0;
    while (pos < b.size()) {
        check(b.size() - pos >= 5 && std::memcmp(b.data() + pos, "FRAME", 5) == 0,
              "bad FRAME marker in frame " + std::to_string(t + 1) + ": " + path);
        pos += 5;
        while (pos < b.size() && b[pos] != '\n') ++pos;  // frame params ignored
        check(pos < b.size(), "truncated frame header in frame " + std::to_string(t + 1) + ": " +
                                  path);
        ++pos;
        check(b.size() - pos >= 3 * plane,
              "truncated pixel data in frame " + std::to_string(t + 1) + ": " + path);
        size_t base = frames.size();
        frames.resize(base + 3 * plane);
        // planes R,G,B -> interleave to (H,W,3)
        for (int c = 0; c < 3; ++c)
            for (size_t i = 0; i < plane; ++i)
                frames[base + i * 3 + static_cast<size_t>(c)] =
                    dequantize8(b[pos + static_cast<size_t>(c) * plane + i]);
        pos += 3 * plane;
        ++t;
    }
    check(t >= 1, "y4m stream has no frames: " + path);
    Clip clip(Tensor(Shape{t, h, w, 3}, std::move(frames)),
              static_cast<double>(num) / static_cast<double>(den));
    validate_clip(clip, path);
    return clip;
}

bool has_ext(const std::string& path, const char* ext) {
    auto p = fs::path(path).extension().string();
    std::transform(p.begin(), p.end(), p.begin(), [](unsigned char c) { return std::tolower(c); });
    return p == ext;
}

}  // namespace

Tensor read_image(const std::string& path) {
    if (has_ext(path, ".ppm")) return read_ppm(path);
    if (has_ext(path, ".png")) return read_png(path);
    throw ValidationError("unsupported image extension (want .ppm or .png): " + path);
}

void write_image(const Tensor& image, const std::string& path) {
    check(image.ndim() == 3 && image.dim(2) == 3, "write_image: need an (H, W, 3) tensor");
    if (has_ext(path, ".ppm")) return write_ppm(image, path);
    if (has_ext(path, ".png")) return write_png(image, path);
    throw ValidationError("unsupported image extension (want .ppm or .png): " + path);
}

Clip read_clip(const std::string& path) {
    if (has_ext(path, ".y4m")) return read_y4m(path);
    check(fs::is_directory(path), "clip path must be a .y4m file or a frame directory: " + path);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(path)) {
        if (!e.is_regular_file()) continue;
        std::string p = e.path().string();
        if (has_ext(p, ".ppm") || has_ext(p, ".png")) names.push_back(p);
    }
    check(!names.empty(), "no .ppm/.png frames found in directory: " + path);
    std::sort(names.begin(), names.end());
    Tensor first = read_image(names[0]);
    int h = first.dim(0), w = first.dim(1);
    Tensor frames(Shape{static_cast<int>(names.size()), h, w, 3});
    std::copy(first.data.begin(), first.data.end(), frames.data.begin());
    for (size_t i = 1; i < names.size(); ++i) {
        Tensor img = read_image(names[i]);
        check(img.dim(0) == h && img.dim(1) == w,
              "inconsistent frame size (" + shape_str(img.shape) + " vs " +
                  shape_str(first.shape) + ") in frame: " + names[i]);
        std::copy(img.data.begin(), img.data.end(),
                  frames.data.begin() + static_cast<int64_t>(i) * h * w * 3);
    }
    Clip clip(std::move(frames), 24.0);
    validate_clip(clip, path);
    return clip;
}

void write_clip(const Clip& clip, const std::string& path, const std::string& frame_ext) {
    validate_clip(clip, "write_clip");
    if (has_ext(path, ".y4m")) {
        if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
        write_y4m(clip, path);
        return;
    }
    check(frame_ext == "ppm" || frame_ext == "png",
          "write_clip: frame extension must be ppm or png, got " + frame_ext);
    fs::create_directories(path);
    for (int f = 0; f < clip.t(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.%s", f + 1, frame_ext.c_str());
        Tensor img(Shape{clip.h(), clip.w(), 3});
        std::copy_n(clip.frames.data.begin() + static_cast<int64_t>(f) * clip.h() * clip.w() * 3,
                    static_cast<int64_t>(clip.h()) * clip.w() * 3, img.data.begin());
        write_image(img, (fs::path(path) / name).string());
    }
}

// ---------------------------------------------------------------------------
// CSV / SVG reports
// ---------------------------------------------------------------------------

std::string csv_quote(const std::string& field) {
    bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

void emit_report(const CsvTable& table, const std::string& path) {
    check(!table.columns.empty(), "emit_report: table has no columns");
    check(!table.rows.empty(), "emit_report: table has no rows");
    std::string out;
    for (size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ",";
        out += csv_quote(table.columns[i]);
    }
    out += "\n";
    for (const auto& row : table.rows) {
        check(row.size() == table.columns.size(), "emit_report: ragged row");
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += csv_quote(row[i]);
        }
        out += "\n";
    }
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    write_file_bytes(path, out.data(), out.size());
}

CsvTable read_report(const std::string& path) {
    auto bytes = read_file_bytes(path);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false;
    size_t i = 0;
    auto end_field = [&]() {
        rec.push_back(field);
        field.clear();
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(rec);
        rec.clear();
    };
    while (i < bytes.size()) {
        char c = static_cast<char>(bytes[i]);
        if (quoted) {
            if (c == '"') {
                if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_record();
        } else if (c != '\r') {
            field += c;
        }
        ++i;
    }
    if (!field.empty() || !rec.empty()) end_record();
    check(!records.empty(), "empty CSV file: " + path);
    CsvTable t;
    t.columns = records[0];
    t.rows.assign(records.begin() + 1, records.end());
    return t;
}

std::string fmt_num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    check_runtime(ec == std::errc(), "number formatting failed");
    return std::string(buf, p);
}

void emit_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& path, const std::string& title) {
    check(!xs.empty() && xs.size() == ys.size(), "emit_curve: xs/ys must be equal non-empty");
    const double W = 640, H = 400, ml = 56, mr = 16, mt = 32, mb = 36;
    double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
    for (size_t i = 0; i < xs.size(); ++i) {
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
        ymin = std::min(ymin, ys[i]);
        ymax = std::max(ymax, ys[i]);
    }
    double xspan = xmax > xmin ? xmax - xmin : 1.0;
    double yspan = ymax > ymin ? ymax - ymin : 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / xspan * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / yspan * (H - mt - mb); };
    char buf[128];
    std::string svg =
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" "
        "height=\"400\" viewBox=\"0 0 640 400\">\n"
        "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"#ffffff\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
                  "stroke=\"#888888\"/>\n",
                  ml, mt, W - ml - mr, H - mt - mb);
    svg += buf;
    if (!title.empty()) {
        svg += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"14\">" +
               title + "</text>\n";
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"end\">%s</text>\n",
                  ml - 6, py(ymax) + 4, fmt_num(ymax).c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"end\">%s</text>\n",
                  ml - 6, py(ymin) + 4, fmt_num(ymin).c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  px(xmin), H - mb + 16, fmt_num(xmin).c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  px(xmax), H - mb + 16, fmt_num(xmax).c_str());
    svg += buf;
    svg += "<polyline fill=\"none\" stroke=\"#2f7d4f\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", i ? " " : "", px(xs[i]), py(ys[i]));
        svg += buf;
    }
    svg += "\"/>\n</svg>\n";
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    write_file_bytes(path, svg.data(), svg.size());
}

}  // namespace gvr
