// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gvr/attention_plan.hpp"
#include "gvr/tensor.hpp"

namespace gvr {

// Tokens of a latent video laid out as (Tl, Hg, Wg) with D channels; the
// flat tensor is (Tl*Hg*Wg, D) row-major, frame-major then row-major within
// a frame.
struct TokenGrid {
    int tl = 0, hg = 0, wg = 0;
    Tensor tokens;

    TokenGrid() = default;
    TokenGrid(int tl_, int hg_, int wg_, Tensor tokens_);

    int n_tokens() const { return tl * hg * wg; }
    int frame_tokens() const { return hg * wg; }
    int dmodel() const { return tokens.ndim() == 2 ? tokens.dim(1) : 0; }
};

// 2D window tiling of one frame. Edge windows are smaller when the grid does
// not divide evenly; a window larger than the frame is clamped to the frame.
struct WindowPartition {
    int wh = 0, ww = 0;  // effective extents after clamping
    int hg = 0, wg = 0;
    // In-frame token indices per window, windows in row-major order.
    std::vector<std::vector<int>> windows;
};

WindowPartition make_windows(int hg, int wg, int wh, int ww);

// Temporal unit slicing: consecutive groups of `unit` latent frames, with a
// cyclic shift of floor(unit/2) applied at odd layer indices so neighbouring
// units exchange information across layers.
struct TemporalUnitPlan {
    int unit = 5;

    int shift_for_layer(int layer_index) const {
        return (layer_index % 2 == 1) ? unit / 2 : 0;
    }
};

// Frame-index groups for one layer: ceil(tl/unit) units; unit j holds frames
// {(j*unit + i + shift) mod tl}. When everything fits in a single unit the
// shift is dropped so the wrap is a strict no-op.
std::vector<std::vector<int>> temporal_units(int tl, int unit, int shift);

// Cyclic roll along time: output frame t = input frame (t + offset) mod tl.
TokenGrid roll_frames(const TokenGrid& g, int offset);
// Cyclic roll within every frame: output (y, x) = input ((y+dy) mod hg, (x+dx) mod wg).
TokenGrid roll_tokens(const TokenGrid& g, int dy, int dx);

enum class AttnMode { kFull, kSwin, kSparseLocal };

const char* attn_mode_name(AttnMode m);
bool parse_attn_mode(const std::string& name, AttnMode& out);

// ---------------------------------------------------------------------------
// Plan builders. `frames` restricts the plan to a frame subset (used by the
// temporal-unit wrapper); group indices are always global token ids.
// ---------------------------------------------------------------------------

AttentionPlan full_plan_over_frames(const TokenGrid& g, const std::vector<int>& frames);
AttentionPlan swin_plan_over_frames(const TokenGrid& g, const WindowPartition& part, bool shifted,
                                    const std::vector<int>& frames);
// Relevance scores need the actual q/k values; selection is top_k windows by
// window-mean dot product (averaged over heads), self always included.
AttentionPlan sparse_plan_over_frames(const TokenGrid& q, const TokenGrid& k, int heads,
                                      const WindowPartition& part, int top_k,
                                      const std::vector<int>& frames);

AttentionPlan full_plan(const TokenGrid& g);
AttentionPlan swin_plan(const TokenGrid& g, const WindowPartition& part, bool shifted);
AttentionPlan sparse_local_plan(const TokenGrid& q, const TokenGrid& k, int heads,
                                const WindowPartition& part, int top_k);

// One merged plan for a whole sequence processed in temporal units, with the
// chosen attention mode inside each unit. This is what the training tape
// records; it is numerically identical to interleaved_temporal_wrap.
AttentionPlan interleaved_plan(const TokenGrid& q, const TokenGrid& k, int heads,
                               const TemporalUnitPlan& tplan, int layer_index, AttnMode mode,
                               const WindowPartition& part, int top_k, bool swin_shifted = false);

// ---------------------------------------------------------------------------
// Attention ops (plan + attend in one call). q/k/v share a layout.
// ---------------------------------------------------------------------------

Tensor full_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                      AttendCapture* capture = nullptr);
Tensor swin_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                      const WindowPartition& part, bool shifted, AttendCapture* capture = nullptr);
Tensor sparse_local_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                              const WindowPartition& part, int top_k,
                              AttendCapture* capture = nullptr);

// Runs `op` independently on every temporal unit of the layer and reassembles
// the sequence; the inverse shift is implicit in the scatter-back.
using UnitAttnOp =
    std::function<Tensor(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v)>;
Tensor interleaved_temporal_wrap(const UnitAttnOp& op, const TokenGrid& q, const TokenGrid& k,
                                 const TokenGrid& v, const TemporalUnitPlan& tplan,
                                 int layer_index);

// ---------------------------------------------------------------------------
// Analytic FLOP accounting. Attention cost counts the QK^T and AV matmuls
// only; QKV/output projections are identical across modes and reported as a
// separate column. The sparse count assumes selected windows have the mean
// window size (exact whenever the grid tiles evenly).
// ---------------------------------------------------------------------------

struct FlopReport {
    double attention_flops = 0.0;   // score + value matmuls
    double relevance_flops = 0.0;   // sparse window-selection scoring
    double projection_flops = 0.0;  // QKV + output linear maps, 8*N*D^2
    double ratio_vs_full = 1.0;     // total() / full-mode total(), same geometry

    double total() const { return attention_flops + relevance_flops; }
};

FlopReport count_flops(int tl, int hg, int wg, int d, int heads, AttnMode mode, int window_h,
                       int window_w, int top_k);

struct BenchRow {
    AttnMode mode;
    int tl = 0, hg = 0, wg = 0, d = 0, heads = 0;
    int window_h = 0, window_w = 0, top_k = 0;
    double analytic_flops = 0.0;
    double wall_ms = 0.0;
};

struct BenchConfig {
    int d = 64;
    int heads = 4;
    int window_h = 4;
    int window_w = 4;
    int top_k = 1;
    int repetitions = 3;
    uint64_t seed = 7;
};

// One row per (mode, size); wall_ms is the median over repetitions.
std::vector<BenchRow> bench_attention(const std::vector<AttnMode>& modes,
                                      const std::vector<std::array<int, 3>>& sizes,
                                      const BenchConfig& cfg);

}  // namespace gvr
