// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gvr/common.hpp"
#include "gvr/media_io.hpp"
#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"

namespace gvr {

namespace {

Tensor frame_of(const Clip& clip, int t) {
    Tensor frame({clip.h(), clip.w(), 3});
    const int n = clip.h() * clip.w() * 3;
    std::copy_n(clip.frames.ptr() + static_cast<int64_t>(t) * n, n, frame.ptr());
    return frame;
}

double mean_of(const Tensor& x) {
    double s = 0.0;
    for (float v : x.data) s += v;
    return s / static_cast<double>(x.numel());
}

// Variance of the 4-neighbour Laplacian response over interior pixels, with
// luma rescaled to 0-255 (the scale the threshold is defined on).
double laplacian_variance(const Tensor& luma) {
    const int h = luma.dim(0), w = luma.dim(1);
    if (h < 3 || w < 3) return 0.0;
    const int64_t n = static_cast<int64_t>(h - 2) * (w - 2);
    double sum = 0.0;
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            double r = 255.0 * (luma.at(y - 1, x) + luma.at(y + 1, x) + luma.at(y, x - 1) +
                                luma.at(y, x + 1) - 4.0 * luma.at(y, x));
            sum += r;
        }
    const double mu = sum / static_cast<double>(n);
    double var = 0.0;
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            double r = 255.0 * (luma.at(y - 1, x) + luma.at(y + 1, x) + luma.at(y, x - 1) +
                                luma.at(y, x + 1) - 4.0 * luma.at(y, x));
            var += (r - mu) * (r - mu);
        }
    return var / static_cast<double>(n);
}

std::string fmt3(double v) { return fmt_num(v); }

// Runs `command <path>` and parses the first float from its stdout.
// Returns false when the command fails or prints nothing numeric.
bool run_musiq_scorer(const std::string& command, const std::string& path, double& score,
                      std::string& error) {
    const std::string full = command + " '" + path + "'";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) {
        error = "could not spawn scorer";
        return false;
    }
    std::string out;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe)) out += buf;
    int status = pclose(pipe);
    if (status != 0) {
        error = "scorer exited with status " + std::to_string(status);
        return false;
    }
    size_t pos = out.find_first_of("0123456789+-.");
    if (pos == std::string::npos) {
        error = "scorer printed no number";
        return false;
    }
    try {
        score = std::stod(out.substr(pos));
    } catch (const std::exception&) {
        error = "scorer printed no number";
        return false;
    }
    return true;
}

CurationVerdict error_verdict(const std::string& clip_id, const std::string& what) {
    CurationVerdict v;
    v.clip_id = clip_id;
    v.accepted = false;
    v.reject_reason = "error: " + what;
    return v;
}

}  // namespace

std::vector<int> curation_sample_frames(int t) {
    check(t >= 1, "curation: clip has no frames");
    const int n = std::min(10, t);
    std::vector<int> idx(n);
    if (n == 1) {
        idx[0] = 0;
        return idx;
    }
    for (int i = 0; i < n; ++i)
        idx[i] = static_cast<int>(std::lround(static_cast<double>(i) * (t - 1) / (n - 1)));
    return idx;
}

CurationVerdict curate_clip(const Clip& clip, const std::string& clip_id,
                            const CurationOptions& opts) {
    validate_clip(clip, "curate");
    check(opts.brightness_lo <= opts.brightness_hi,
          "curation: brightness interval is inverted");

    CurationVerdict v;
    v.clip_id = clip_id;

    const std::vector<int> sample = curation_sample_frames(clip.t());
    double brightness = 0.0, lap = 0.0;
    for (int t : sample) {
        Tensor luma = rec601_luma(frame_of(clip, t));
        brightness += mean_of(luma);
        lap += laplacian_variance(luma);
    }
    v.mean_brightness = brightness / static_cast<double>(sample.size());
    v.laplacian_variance = lap / static_cast<double>(sample.size());

    if (v.mean_brightness < opts.brightness_lo || v.mean_brightness > opts.brightness_hi) {
        v.reject_reason = "brightness " + fmt3(v.mean_brightness) + " outside [" +
                          fmt3(opts.brightness_lo) + ", " + fmt3(opts.brightness_hi) + "]";
        return v;
    }
    if (v.laplacian_variance < opts.laplacian_min) {
        v.reject_reason = "laplacian variance " + fmt3(v.laplacian_variance) + " below " +
                          fmt3(opts.laplacian_min);
        return v;
    }
    v.accepted = true;
    return v;
}

CurationVerdict curate_file(const std::string& path, const CurationOptions& opts) {
    const std::string id = std::filesystem::path(path).filename().string();
    Clip clip;
    try {
        clip = read_clip(path);
    } catch (const std::exception& e) {
        return error_verdict(id, e.what());
    }
    CurationVerdict v;
    try {
        v = curate_clip(clip, id, opts);
    } catch (const std::exception& e) {
        return error_verdict(id, e.what());
    }
    if (!opts.musiq_command.empty()) {
        double score = 0.0;
        std::string err;
        if (!run_musiq_scorer(opts.musiq_command, path, score, err))
            return error_verdict(id, "musiq " + err);
        v.musiq = score;
        if (v.accepted && score < opts.musiq_min) {
            v.accepted = false;
            v.reject_reason = "musiq " + fmt3(score) + " below " + fmt3(opts.musiq_min);
        }
    }
    return v;
}

std::vector<CurationVerdict> curate_directory(const std::string& dir,
                                              const CurationOptions& opts) {
    namespace fs = std::filesystem;
    check(fs::is_directory(dir), "curate: '" + dir + "' is not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".y4m")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    check(!paths.empty(), "curate: no .y4m clips in '" + dir + "'");

    std::vector<CurationVerdict> verdicts(paths.size());
    parallel_for(static_cast<int64_t>(paths.size()),
                 [&](int64_t i) { verdicts[i] = curate_file(paths[i], opts); });
    return verdicts;
}

void write_curation_report(const std::vector<CurationVerdict>& verdicts,
                           const std::string& path) {
    CsvTable table;
    table.columns = {"clip", "brightness", "laplacian_variance", "musiq", "accepted", "reason"};
    for (const CurationVerdict& v : verdicts)
        table.rows.push_back({v.clip_id, fmt_num(v.mean_brightness),
                              fmt_num(v.laplacian_variance),
                              v.musiq ? fmt_num(*v.musiq) : std::string{},
                              v.accepted ? "1" : "0", v.reject_reason});
    emit_report(table, path);
}

}  // namespace gvr
