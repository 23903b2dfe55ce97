// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gvr/clip.hpp"

namespace gvr {

// Dataset-screening thresholds. Brightness bounds are on mean Rec.601 luma in
// [0,1]; the Laplacian-variance floor is on the 0-255 luma scale. The MUSIQ
// filter only runs when an external scorer command is configured.
struct CurationOptions {
    double brightness_lo = 0.08;
    double brightness_hi = 0.92;
    double laplacian_min = 30.0;
    double musiq_min = 40.0;
    std::string musiq_command;  // empty = filter disabled
};

struct CurationVerdict {
    std::string clip_id;
    double mean_brightness = 0.0;
    double laplacian_variance = 0.0;
    std::optional<double> musiq;  // absent unless a scorer is configured
    bool accepted = false;
    std::string reject_reason;  // empty when accepted
};

// Indices of the screening sample: 10 uniformly spaced frames, or every frame
// when the clip is shorter than 10.
std::vector<int> curation_sample_frames(int t);

// Screens an in-memory clip (brightness, then Laplacian variance). The MUSIQ
// hook needs a file path, so it never fires here.
CurationVerdict curate_clip(const Clip& clip, const std::string& clip_id,
                            const CurationOptions& opts = {});

// Screens a clip file; unreadable input yields an error verdict rather than
// throwing. Runs the MUSIQ scorer (command gets the path appended) when one
// is configured; a scorer that fails or prints no number is an error verdict.
CurationVerdict curate_file(const std::string& path, const CurationOptions& opts = {});

// All *.y4m files under `dir` in filename order, screened on the worker pool;
// the result order (and content) is independent of worker count.
std::vector<CurationVerdict> curate_directory(const std::string& dir,
                                              const CurationOptions& opts = {});

// CSV with columns clip,brightness,laplacian_variance,musiq,accepted,reason.
void write_curation_report(const std::vector<CurationVerdict>& verdicts,
                           const std::string& path);

}  // namespace gvr
