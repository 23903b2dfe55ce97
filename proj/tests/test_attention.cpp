// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gvr/attention.hpp"
#include "gvr/parallel.hpp"
#include "gvr/tape.hpp"
#include "oracles.hpp"

using namespace gvr;

namespace {

TokenGrid random_grid(Rng& rng, int tl, int hg, int wg, int d) {
    return TokenGrid(tl, hg, wg, randn(rng, Shape{tl * hg * wg, d}));
}

}  // namespace

TEST_CASE("full attention: single token passes v through") {
    Rng rng(1, 0);
    TokenGrid q = random_grid(rng, 1, 1, 1, 8);
    TokenGrid k = random_grid(rng, 1, 1, 1, 8);
    TokenGrid v = random_grid(rng, 1, 1, 1, 8);
    Tensor out = full_attention(q, k, v, 2);
    CHECK(max_abs_diff(out, v.tokens) < 1e-6);
}

TEST_CASE("full attention: constant keys average v regardless of q") {
    Rng rng(2, 0);
    int n = 6, d = 4;
    TokenGrid q(1, 2, 3, randn(rng, Shape{n, d}));
    Tensor krow = randn(rng, Shape{1, d});
    Tensor kt(Shape{n, d});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) kt.at(i, c) = krow.at(0, c);
    TokenGrid k(1, 2, 3, kt);
    TokenGrid v(1, 2, 3, randn(rng, Shape{n, d}));
    Tensor out = full_attention(q, k, v, 2);
    for (int c = 0; c < d; ++c) {
        double avg = 0.0;
        for (int i = 0; i < n; ++i) avg += v.tokens.at(i, c);
        avg /= n;
        for (int i = 0; i < n; ++i) CHECK(out.at(i, c) == doctest::Approx(avg).epsilon(1e-5));
    }
}

TEST_CASE("full attention: 12 random tokens match the naive reference") {
    Rng rng(3, 0);
    TokenGrid q = random_grid(rng, 1, 3, 4, 8);
    TokenGrid k = random_grid(rng, 1, 3, 4, 8);
    TokenGrid v = random_grid(rng, 1, 3, 4, 8);
    Tensor out = full_attention(q, k, v, 2);
    Tensor ref = oracle::attention_loop(q.tokens, k.tokens, v.tokens, 2);
    CHECK(max_abs_diff(out, ref) < 1e-5);
}

TEST_CASE("swin: window covering the whole frame equals per-frame full attention") {
    Rng rng(4, 0);
    int tl = 3, hg = 4, wg = 3, d = 8;
    TokenGrid q = random_grid(rng, tl, hg, wg, d);
    TokenGrid k = random_grid(rng, tl, hg, wg, d);
    TokenGrid v = random_grid(rng, tl, hg, wg, d);
    auto part = make_windows(hg, wg, 64, 64);  // clamped to the frame
    CHECK(part.windows.size() == 1);
    Tensor out = swin_attention(q, k, v, 2, part, false);
    // Reference: full attention run on each frame independently.
    int fsz = hg * wg;
    Tensor ref(Shape{tl * fsz, d});
    for (int f = 0; f < tl; ++f) {
        std::vector<int> idx;
        for (int i = 0; i < fsz; ++i) idx.push_back(f * fsz + i);
        oracle::attention_group_loop(q.tokens, k.tokens, v.tokens, 2, idx, idx, ref);
    }
    CHECK(max_abs_diff(out, ref) < 1e-5);
}

TEST_CASE("swin: 2x2 windows on a 4x4 grid match the per-window reference") {
    Rng rng(5, 0);
    TokenGrid q = random_grid(rng, 1, 4, 4, 8);
    TokenGrid k = random_grid(rng, 1, 4, 4, 8);
    TokenGrid v = random_grid(rng, 1, 4, 4, 8);
    auto part = make_windows(4, 4, 2, 2);
    CHECK(part.windows.size() == 4);
    Tensor out = swin_attention(q, k, v, 2, part, false);
    Tensor ref(Shape{16, 8});
    for (const auto& win : part.windows)
        oracle::attention_group_loop(q.tokens, k.tokens, v.tokens, 2, win, win, ref);
    CHECK(max_abs_diff(out, ref) < 1e-5);
}

TEST_CASE("swin shifted: matches roll -> unshifted swin -> unroll") {
    Rng rng(6, 0);
    int tl = 2, hg = 4, wg = 6, d = 8;
    TokenGrid q = random_grid(rng, tl, hg, wg, d);
    TokenGrid k = random_grid(rng, tl, hg, wg, d);
    TokenGrid v = random_grid(rng, tl, hg, wg, d);
    auto part = make_windows(hg, wg, 2, 2);
    Tensor shifted = swin_attention(q, k, v, 2, part, true);

    int sh = part.wh / 2, sw = part.ww / 2;
    TokenGrid qr = roll_tokens(q, sh, sw), kr = roll_tokens(k, sh, sw),
              vr = roll_tokens(v, sh, sw);
    Tensor inner = swin_attention(qr, kr, vr, 2, part, false);
    TokenGrid rolled_back = roll_tokens(TokenGrid(tl, hg, wg, inner), -sh, -sw);
    CHECK(max_abs_diff(shifted, rolled_back.tokens) < 1e-5);
}

TEST_CASE("roll_tokens / roll_frames: round trips are bitwise") {
    Rng rng(7, 0);
    TokenGrid g = random_grid(rng, 5, 3, 4, 6);
    TokenGrid a = roll_tokens(roll_tokens(g, 1, 2), -1, -2);
    CHECK(a.tokens.data == g.tokens.data);
    TokenGrid b = roll_frames(roll_frames(g, 2), -2);
    CHECK(b.tokens.data == g.tokens.data);
}

TEST_CASE("sparse: saturated top_k equals full attention") {
    Rng rng(8, 0);
    for (int trial = 0; trial < 5; ++trial) {
        int tl = 1 + static_cast<int>(rng.below(3));
        int hg = 2 + static_cast<int>(rng.below(4));
        int wg = 2 + static_cast<int>(rng.below(4));
        TokenGrid q = random_grid(rng, tl, hg, wg, 8);
        TokenGrid k = random_grid(rng, tl, hg, wg, 8);
        TokenGrid v = random_grid(rng, tl, hg, wg, 8);
        auto part = make_windows(hg, wg, 2, 2);
        int numwin = static_cast<int>(part.windows.size()) * tl;
        Tensor sparse = sparse_local_attention(q, k, v, 2, part, numwin - 1);
        Tensor full = full_attention(q, k, v, 2);
        CHECK(max_abs_diff(sparse, full) < 1e-5);
    }
}

TEST_CASE("sparse: top_k = 0 equals unshifted window attention") {
    Rng rng(9, 0);
    TokenGrid q = random_grid(rng, 2, 4, 4, 8);
    TokenGrid k = random_grid(rng, 2, 4, 4, 8);
    TokenGrid v = random_grid(rng, 2, 4, 4, 8);
    auto part = make_windows(4, 4, 2, 2);
    Tensor sparse = sparse_local_attention(q, k, v, 2, part, 0);
    Tensor swin = swin_attention(q, k, v, 2, part, false);
    CHECK(max_abs_diff(sparse, swin) < 1e-5);
}

TEST_CASE("sparse: relevance picks the window with aligned keys") {
    // 4x4 grid, 2x2 windows. Window 0's queries all equal u; window 3's keys
    // equal u while windows 1 and 2 hold keys orthogonal to u, so window 3
    // must be the one selected for window 0 at top_k = 1.
    int d = 4, heads = 2;
    Tensor qt = Tensor::zeros(Shape{16, d});
    Tensor kt = Tensor::zeros(Shape{16, d});
    Tensor vt(Shape{16, d});
    Rng rng(10, 0);
    vt = randn(rng, Shape{16, d});
    auto part = make_windows(4, 4, 2, 2);
    std::vector<float> u = {1.0f, 0.0f, 1.0f, 0.0f};     // head slices (1,0) and (1,0)
    std::vector<float> orth = {0.0f, 1.0f, 0.0f, 1.0f};  // orthogonal in both heads
    for (int idx : part.windows[0])
        for (int c = 0; c < d; ++c) qt.at(idx, c) = u[static_cast<size_t>(c)];
    for (int w = 1; w < 4; ++w)
        for (int idx : part.windows[static_cast<size_t>(w)])
            for (int c = 0; c < d; ++c)
                kt.at(idx, c) = (w == 3) ? u[static_cast<size_t>(c)] : orth[static_cast<size_t>(c)];
    TokenGrid q(1, 4, 4, qt), k(1, 4, 4, kt), v(1, 4, 4, vt);

    AttentionPlan plan = sparse_local_plan(q, k, heads, part, 1);
    // Window 0's kv set must be exactly windows {0, 3}.
    std::vector<int> want = part.windows[0];
    want.insert(want.end(), part.windows[3].begin(), part.windows[3].end());
    std::sort(want.begin(), want.end());
    std::vector<int> got = plan.groups[0].kv_idx;
    std::sort(got.begin(), got.end());
    CHECK(got == want);

    Tensor out = attend(q.tokens, k.tokens, v.tokens, heads, plan);
    Tensor ref(Shape{16, d});
    for (size_t g = 0; g < plan.groups.size(); ++g)
        oracle::attention_group_loop(qt, kt, vt, heads, plan.groups[g].q_idx,
                                     plan.groups[g].kv_idx, ref);
    CHECK(max_abs_diff(out, ref) < 1e-5);
}

TEST_CASE("attention rows are stochastic under instrumentation") {
    Rng rng(11, 0);
    TokenGrid q = random_grid(rng, 2, 4, 4, 8);
    TokenGrid k = random_grid(rng, 2, 4, 4, 8);
    TokenGrid v = random_grid(rng, 2, 4, 4, 8);
    auto part = make_windows(4, 4, 2, 2);
    std::vector<double> sums;
    AttendCapture cap;
    cap.row_sums = &sums;
    sparse_local_attention(q, k, v, 2, part, 2, &cap);
    CHECK(sums.size() == 2u * 32u);  // heads * tokens
    for (double s : sums) CHECK(std::fabs(s - 1.0) < 1e-5);
}

TEST_CASE("attention output is bit-stable across worker counts") {
    Rng rng(12, 0);
    TokenGrid q = random_grid(rng, 3, 4, 4, 8);
    TokenGrid k = random_grid(rng, 3, 4, 4, 8);
    TokenGrid v = random_grid(rng, 3, 4, 4, 8);
    auto part = make_windows(4, 4, 2, 2);
    set_workers(1);
    Tensor a = sparse_local_attention(q, k, v, 2, part, 3);
    set_workers(4);
    Tensor b = sparse_local_attention(q, k, v, 2, part, 3);
    set_workers(0);
    CHECK(a.data == b.data);
}

// ---------------------------------------------------------------------------
// temporal units
// ---------------------------------------------------------------------------

TEST_CASE("temporal units: 20 frames at unit 5 give 4 units") {
    auto units = temporal_units(20, 5, 0);
    CHECK(units.size() == 4);
    for (const auto& u : units) CHECK(u.size() == 5);
    CHECK(units[1] == std::vector<int>{5, 6, 7, 8, 9});
    auto shifted = temporal_units(20, 5, 2);
    CHECK(shifted.size() == 4);
    CHECK(shifted[0] == std::vector<int>{2, 3, 4, 5, 6});
    CHECK(shifted[3] == std::vector<int>{17, 18, 19, 0, 1});
}

TEST_CASE("temporal wrap: single unit is a strict no-op") {
    Rng rng(13, 0);
    TokenGrid q = random_grid(rng, 5, 2, 3, 8);
    TokenGrid k = random_grid(rng, 5, 2, 3, 8);
    TokenGrid v = random_grid(rng, 5, 2, 3, 8);
    TemporalUnitPlan plan;  // unit 5
    auto op = [](const TokenGrid& uq, const TokenGrid& uk, const TokenGrid& uv) {
        return full_attention(uq, uk, uv, 2);
    };
    Tensor direct = full_attention(q, k, v, 2);
    for (int layer = 0; layer < 2; ++layer) {
        Tensor wrapped = interleaved_temporal_wrap(op, q, k, v, plan, layer);
        CHECK(wrapped.data == direct.data);
    }
}

TEST_CASE("temporal wrap: independent units and shift parity") {
    Rng rng(14, 0);
    int tl = 10;
    TokenGrid q = random_grid(rng, tl, 2, 2, 8);
    TokenGrid k = random_grid(rng, tl, 2, 2, 8);
    TokenGrid v = random_grid(rng, tl, 2, 2, 8);
    TemporalUnitPlan plan;
    auto op = [](const TokenGrid& uq, const TokenGrid& uk, const TokenGrid& uv) {
        return full_attention(uq, uk, uv, 2);
    };
    // Even layer: frames 0-4 and 5-9 attend separately; check against manual
    // per-unit reference.
    Tensor even = interleaved_temporal_wrap(op, q, k, v, plan, 0);
    int fsz = 4, d = 8;
    Tensor ref(Shape{tl * fsz, d});
    for (int u = 0; u < 2; ++u) {
        std::vector<int> idx;
        for (int f = u * 5; f < u * 5 + 5; ++f)
            for (int i = 0; i < fsz; ++i) idx.push_back(f * fsz + i);
        oracle::attention_group_loop(q.tokens, k.tokens, v.tokens, 2, idx, idx, ref);
    }
    CHECK(max_abs_diff(even, ref) < 1e-5);

    // Odd layer: units are {2..6} and {7..9,0,1}.
    Tensor odd = interleaved_temporal_wrap(op, q, k, v, plan, 1);
    Tensor ref2(Shape{tl * fsz, d});
    std::vector<std::vector<int>> unit_frames = {{2, 3, 4, 5, 6}, {7, 8, 9, 0, 1}};
    for (const auto& frames : unit_frames) {
        std::vector<int> idx;
        for (int f : frames)
            for (int i = 0; i < fsz; ++i) idx.push_back(f * fsz + i);
        oracle::attention_group_loop(q.tokens, k.tokens, v.tokens, 2, idx, idx, ref2);
    }
    CHECK(max_abs_diff(odd, ref2) < 1e-5);
}

TEST_CASE("interleaved_plan matches the functional wrap") {
    Rng rng(15, 0);
    int tl = 10;
    TokenGrid q = random_grid(rng, tl, 4, 4, 8);
    TokenGrid k = random_grid(rng, tl, 4, 4, 8);
    TokenGrid v = random_grid(rng, tl, 4, 4, 8);
    TemporalUnitPlan tplan;
    auto part = make_windows(4, 4, 2, 2);
    for (int layer = 0; layer < 2; ++layer) {
        for (AttnMode mode : {AttnMode::kFull, AttnMode::kSwin, AttnMode::kSparseLocal}) {
            AttentionPlan plan = interleaved_plan(q, k, 2, tplan, layer, mode, part, 3);
            Tensor via_plan = attend(q.tokens, k.tokens, v.tokens, 2, plan);
            auto op = [&](const TokenGrid& uq, const TokenGrid& uk, const TokenGrid& uv) {
                switch (mode) {
                    case AttnMode::kFull: return full_attention(uq, uk, uv, 2);
                    case AttnMode::kSwin: return swin_attention(uq, uk, uv, 2, part, false);
                    default: return sparse_local_attention(uq, uk, uv, 2, part, 3);
                }
            };
            Tensor via_wrap = interleaved_temporal_wrap(op, q, k, v, tplan, layer);
            CHECK(max_abs_diff(via_plan, via_wrap) < 1e-5);
        }
    }
}

// ---------------------------------------------------------------------------
// gradients through attention
// ---------------------------------------------------------------------------

TEST_CASE("attention gradient passes finite differences") {
    Rng rng(16, 0);
    int n = 8, d = 4, heads = 2;
    std::vector<Tensor> params{randn(rng, Shape{n, d}), randn(rng, Shape{n, d}),
                               randn(rng, Shape{n, d})};
    TokenGrid geom(1, 2, 4, params[0]);
    auto part = make_windows(2, 4, 2, 2);
    AttentionPlan plan = sparse_local_plan(TokenGrid(1, 2, 4, params[0]),
                                           TokenGrid(1, 2, 4, params[1]), heads, part, 1);

    auto eval = [&](const std::vector<Tensor>& p) {
        GradTape t;
        auto q = t.param(p[0]);
        auto k = t.param(p[1]);
        auto v = t.param(p[2]);
        return t.attention(q, k, v, heads, plan);
    };
    GradTape t;
    auto q = t.param(params[0]);
    auto k = t.param(params[1]);
    auto v = t.param(params[2]);
    t.backward(t.mean_all(t.silu(t.attention(q, k, v, heads, plan))));
    std::vector<Tensor> grads{t.grad(q), t.grad(k), t.grad(v)};

    auto loss = [&](const std::vector<Tensor>& p) {
        GradTape tt;
        auto qq = tt.param(p[0]);
        auto kk = tt.param(p[1]);
        auto vv = tt.param(p[2]);
        return static_cast<double>(
            tt.val(tt.mean_all(tt.silu(tt.attention(qq, kk, vv, heads, plan)))).data[0]);
    };
    CHECK(oracle::fd_relative_error(loss, params, grads, 1e-3) <= 1e-3);
    (void)eval;
}

// ---------------------------------------------------------------------------
// FLOP accounting
// ---------------------------------------------------------------------------

TEST_CASE("flops: saturated sparse with frame window equals full") {
    int tl = 4, hg = 6, wg = 6, d = 32, heads = 4;
    FlopReport full = count_flops(tl, hg, wg, d, heads, AttnMode::kFull, hg, wg, 0);
    FlopReport sparse =
        count_flops(tl, hg, wg, d, heads, AttnMode::kSparseLocal, hg, wg, tl - 1);
    CHECK(sparse.attention_flops == full.attention_flops);
    CHECK(sparse.relevance_flops > 0.0);
    CHECK(full.projection_flops == sparse.projection_flops);
}

TEST_CASE("flops: doubling tokens quadruples full attention exactly") {
    int d = 64, heads = 4;
    FlopReport a = count_flops(2, 8, 8, d, heads, AttnMode::kFull, 4, 4, 0);
    FlopReport b = count_flops(4, 8, 8, d, heads, AttnMode::kFull, 4, 4, 0);
    CHECK(b.attention_flops == 4.0 * a.attention_flops);
}

TEST_CASE("flops: non-decreasing in top_k") {
    double prev = -1.0;
    for (int top_k = 0; top_k < 8; ++top_k) {
        FlopReport r = count_flops(2, 8, 8, 32, 4, AttnMode::kSparseLocal, 4, 4, top_k);
        CHECK(r.total() >= prev);
        prev = r.total();
    }
}

TEST_CASE("flops: 1080p-analogue sparse/full ratio is far under a quarter") {
    // Full-HD latent token grid: 1080/8 x 1920/8 = 135 x 240 per frame, five
    // latent frames, 12x9-token windows, one extra attended window.
    FlopReport r = count_flops(5, 135, 240, 64, 8, AttnMode::kSparseLocal, 9, 12, 1);
    CHECK(r.ratio_vs_full <= 0.25);
    CHECK(r.ratio_vs_full > 0.0);
}

TEST_CASE("bench: one row per mode/size with analytic column wired through") {
    BenchConfig cfg;
    cfg.d = 16;
    cfg.heads = 2;
    cfg.repetitions = 1;
    std::vector<AttnMode> modes{AttnMode::kFull, AttnMode::kSparseLocal};
    std::vector<std::array<int, 3>> sizes{{1, 4, 4}, {2, 4, 4}};
    auto rows = bench_attention(modes, sizes, cfg);
    CHECK(rows.size() == 4);
    for (const auto& row : rows) {
        FlopReport want = count_flops(row.tl, row.hg, row.wg, row.d, row.heads, row.mode,
                                      row.window_h, row.window_w, row.top_k);
        CHECK(row.analytic_flops == want.total());
        CHECK(row.wall_ms >= 0.0);
    }
}
