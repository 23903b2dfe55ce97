// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gvr/parallel.hpp"
#include "gvr/rng.hpp"
#include "gvr/tape.hpp"

namespace gvr {

// ---------------------------------------------------------------------------
// plan + core attention
// ---------------------------------------------------------------------------

void AttentionPlan::validate(int n_tokens) const {
    std::vector<char> seen(static_cast<size_t>(n_tokens), 0);
    int covered = 0;
    for (const auto& g : groups) {
        check(!g.q_idx.empty() && !g.kv_idx.empty(), "attention plan: empty group");
        for (int qi : g.q_idx) {
            check(qi >= 0 && qi < n_tokens, "attention plan: query index out of range");
            check(!seen[static_cast<size_t>(qi)], "attention plan: query index assigned twice");
            seen[static_cast<size_t>(qi)] = 1;
            ++covered;
        }
        for (int ki : g.kv_idx)
            check(ki >= 0 && ki < n_tokens, "attention plan: key index out of range");
    }
    check(covered == n_tokens, "attention plan: query groups must cover every token");
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
              const AttentionPlan& plan, AttendCapture* capture) {
    check(q.ndim() == 2 && same_shape(q.shape, k.shape) && same_shape(q.shape, v.shape),
          "attend: q/k/v must be matching (N, D) tensors");
    int n = q.dim(0), d = q.dim(1);
    check(heads > 0 && d % heads == 0, "attend: D must be divisible by the head count");
    plan.validate(n);
    int hd = d / heads;
    float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    Tensor out(Shape{n, d});
    int ng = static_cast<int>(plan.groups.size());
    if (capture) capture->group_probs.assign(static_cast<size_t>(ng), Tensor{});

    auto run_group = [&](int gi) {
        const auto& g = plan.groups[static_cast<size_t>(gi)];
        int nq = static_cast<int>(g.q_idx.size());
        int nk = static_cast<int>(g.kv_idx.size());
        Tensor probs(Shape{heads, nq, nk});
        std::vector<float> sc(static_cast<size_t>(nk));
        for (int h = 0; h < heads; ++h) {
            int off = h * hd;
            for (int iq = 0; iq < nq; ++iq) {
                const float* qrow = q.ptr() + static_cast<int64_t>(g.q_idx[static_cast<size_t>(iq)]) * d + off;
                float smax = -std::numeric_limits<float>::infinity();
                for (int jk = 0; jk < nk; ++jk) {
                    float s = scale * dotf(qrow,
                                           k.ptr() + static_cast<int64_t>(g.kv_idx[static_cast<size_t>(jk)]) * d + off,
                                           hd);
                    sc[static_cast<size_t>(jk)] = s;
                    smax = std::max(smax, s);
                }
                double denom = 0.0;
                for (int jk = 0; jk < nk; ++jk)
                    denom += std::exp(static_cast<double>(sc[static_cast<size_t>(jk)]) - smax);
                float* prow = probs.ptr() + (static_cast<int64_t>(h) * nq + iq) * nk;
                double psum = 0.0;
                for (int jk = 0; jk < nk; ++jk) {
                    double p = std::exp(static_cast<double>(sc[static_cast<size_t>(jk)]) - smax) / denom;
                    prow[jk] = static_cast<float>(p);
                    psum += p;
                }
                if (capture && capture->row_sums) capture->row_sums->push_back(psum);
                float* orow = out.ptr() + static_cast<int64_t>(g.q_idx[static_cast<size_t>(iq)]) * d + off;
                for (int jk = 0; jk < nk; ++jk)
                    axpyf(orow, v.ptr() + static_cast<int64_t>(g.kv_idx[static_cast<size_t>(jk)]) * d + off,
                          prow[jk], hd);
            }
        }
        if (capture) capture->group_probs[static_cast<size_t>(gi)] = std::move(probs);
    };

    // Groups write disjoint output rows, so this is free to run in parallel;
    // the instrumented row-sum log must stay in one deterministic order.
    if (capture && capture->row_sums) {
        for (int gi = 0; gi < ng; ++gi) run_group(gi);
    } else {
        parallel_for(ng, [&](int64_t gi) { run_group(static_cast<int>(gi)); });
    }
    return out;
}

void attend_backward(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                     const AttentionPlan& plan, const AttendCapture& capture,
                     const Tensor& grad_out, Tensor& dq, Tensor& dk, Tensor& dv) {
    int d = q.dim(1);
    int hd = d / heads;
    float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    check_runtime(capture.group_probs.size() == plan.groups.size(),
                  "attend_backward: capture does not match plan");

    // Groups may share kv rows, so iterate groups sequentially; heads touch
    // disjoint channel slices and parallelize safely.
    for (size_t gi = 0; gi < plan.groups.size(); ++gi) {
        const auto& g = plan.groups[gi];
        const Tensor& probs = capture.group_probs[gi];
        int nq = static_cast<int>(g.q_idx.size());
        int nk = static_cast<int>(g.kv_idx.size());
        parallel_for(heads, [&](int64_t h) {
            int off = static_cast<int>(h) * hd;
            std::vector<float> da(static_cast<size_t>(nk));
            std::vector<float> ds(static_cast<size_t>(nk));
            for (int iq = 0; iq < nq; ++iq) {
                int qi = g.q_idx[static_cast<size_t>(iq)];
                const float* grow = grad_out.ptr() + static_cast<int64_t>(qi) * d + off;
                const float* prow = probs.ptr() + (h * nq + iq) * nk;
                double inner = 0.0;
                for (int jk = 0; jk < nk; ++jk) {
                    int ki = g.kv_idx[static_cast<size_t>(jk)];
                    da[static_cast<size_t>(jk)] =
                        dotf(grow, v.ptr() + static_cast<int64_t>(ki) * d + off, hd);
                    inner += static_cast<double>(da[static_cast<size_t>(jk)]) * prow[jk];
                }
                for (int jk = 0; jk < nk; ++jk)
                    ds[static_cast<size_t>(jk)] =
                        prow[jk] * (da[static_cast<size_t>(jk)] - static_cast<float>(inner));
                float* dqrow = dq.ptr() + static_cast<int64_t>(qi) * d + off;
                const float* qrow = q.ptr() + static_cast<int64_t>(qi) * d + off;
                for (int jk = 0; jk < nk; ++jk) {
                    int ki = g.kv_idx[static_cast<size_t>(jk)];
                    float dsv = scale * ds[static_cast<size_t>(jk)];
                    axpyf(dqrow, k.ptr() + static_cast<int64_t>(ki) * d + off, dsv, hd);
                    axpyf(dk.ptr() + static_cast<int64_t>(ki) * d + off, qrow, dsv, hd);
                    axpyf(dv.ptr() + static_cast<int64_t>(ki) * d + off, grow, prow[jk], hd);
                }
            }
        });
    }
}

// ---------------------------------------------------------------------------
// token-grid geometry
// ---------------------------------------------------------------------------

TokenGrid::TokenGrid(int tl_, int hg_, int wg_, Tensor tokens_)
    : tl(tl_), hg(hg_), wg(wg_), tokens(std::move(tokens_)) {
    check(tl > 0 && hg > 0 && wg > 0, "token grid: extents must be positive");
    check(tokens.ndim() == 2 && tokens.dim(0) == tl * hg * wg,
          "token grid: tensor rows must equal Tl*Hg*Wg");
}

WindowPartition make_windows(int hg, int wg, int wh, int ww) {
    check(hg > 0 && wg > 0 && wh > 0 && ww > 0, "window partition: extents must be positive");
    WindowPartition p;
    p.hg = hg;
    p.wg = wg;
    p.wh = std::min(wh, hg);
    p.ww = std::min(ww, wg);
    for (int y0 = 0; y0 < hg; y0 += p.wh)
        for (int x0 = 0; x0 < wg; x0 += p.ww) {
            std::vector<int> idx;
            int y1 = std::min(y0 + p.wh, hg), x1 = std::min(x0 + p.ww, wg);
            idx.reserve(static_cast<size_t>((y1 - y0) * (x1 - x0)));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) idx.push_back(y * wg + x);
            p.windows.push_back(std::move(idx));
        }
    return p;
}

std::vector<std::vector<int>> temporal_units(int tl, int unit, int shift) {
    check(unit > 0, "temporal units: unit length must be positive");
    check(tl > 0, "temporal units: sequence must be non-empty");
    int n_units = (tl + unit - 1) / unit;
    if (n_units <= 1) shift = 0;  // a lone unit has no neighbour to exchange with
    std::vector<std::vector<int>> units(static_cast<size_t>(n_units));
    for (int j = 0; j < n_units; ++j) {
        int lo = j * unit, hi = std::min(lo + unit, tl);
        for (int i = lo; i < hi; ++i)
            units[static_cast<size_t>(j)].push_back((i + shift) % tl);
    }
    return units;
}

TokenGrid roll_frames(const TokenGrid& g, int offset) {
    TokenGrid out = g;
    int fsz = g.frame_tokens(), d = g.dmodel();
    int off = ((offset % g.tl) + g.tl) % g.tl;
    for (int t = 0; t < g.tl; ++t) {
        int src = (t + off) % g.tl;
        std::copy_n(g.tokens.ptr() + static_cast<int64_t>(src) * fsz * d,
                    static_cast<int64_t>(fsz) * d,
                    out.tokens.ptr() + static_cast<int64_t>(t) * fsz * d);
    }
    return out;
}

TokenGrid roll_tokens(const TokenGrid& g, int dy, int dx) {
    TokenGrid out = g;
    int d = g.dmodel();
    int oy = ((dy % g.hg) + g.hg) % g.hg;
    int ox = ((dx % g.wg) + g.wg) % g.wg;
    for (int t = 0; t < g.tl; ++t)
        for (int y = 0; y < g.hg; ++y)
            for (int x = 0; x < g.wg; ++x) {
                int sy = (y + oy) % g.hg, sx = (x + ox) % g.wg;
                std::copy_n(
                    g.tokens.ptr() +
                        (static_cast<int64_t>(t) * g.hg * g.wg + sy * g.wg + sx) * d,
                    d,
                    out.tokens.ptr() +
                        (static_cast<int64_t>(t) * g.hg * g.wg + y * g.wg + x) * d);
            }
    return out;
}

const char* attn_mode_name(AttnMode m) {
    switch (m) {
        case AttnMode::kFull: return "full";
        case AttnMode::kSwin: return "swin";
        case AttnMode::kSparseLocal: return "sparse_local";
    }
    return "?";
}

bool parse_attn_mode(const std::string& name, AttnMode& out) {
    if (name == "full") out = AttnMode::kFull;
    else if (name == "swin") out = AttnMode::kSwin;
    else if (name == "sparse_local") out = AttnMode::kSparseLocal;
    else return false;
    return true;
}

// ---------------------------------------------------------------------------
// plan builders
// ---------------------------------------------------------------------------

namespace {

std::vector<int> all_frames(int tl) {
    std::vector<int> f(static_cast<size_t>(tl));
    std::iota(f.begin(), f.end(), 0);
    return f;
}

}  // namespace

AttentionPlan full_plan_over_frames(const TokenGrid& g, const std::vector<int>& frames) {
    AttentionGroup grp;
    int fsz = g.frame_tokens();
    for (int f : frames)
        for (int i = 0; i < fsz; ++i) grp.q_idx.push_back(f * fsz + i);
    grp.kv_idx = grp.q_idx;
    AttentionPlan plan;
    plan.groups.push_back(std::move(grp));
    return plan;
}

AttentionPlan swin_plan_over_frames(const TokenGrid& g, const WindowPartition& part, bool shifted,
                                    const std::vector<int>& frames) {
    check(part.hg == g.hg && part.wg == g.wg, "swin: partition built for a different grid");
    int fsz = g.frame_tokens();
    int sh = shifted ? part.wh / 2 : 0;
    int sw = shifted ? part.ww / 2 : 0;
    AttentionPlan plan;
    for (int f : frames)
        for (const auto& win : part.windows) {
            AttentionGroup grp;
            grp.q_idx.reserve(win.size());
            for (int idx : win) {
                int y = idx / g.wg, x = idx % g.wg;
                // A shifted window covers the tokens that a cyclic roll by
                // (-sh, -sw) would bring into the regular window.
                int token = ((y + sh) % g.hg) * g.wg + (x + sw) % g.wg;
                grp.q_idx.push_back(f * fsz + token);
            }
            grp.kv_idx = grp.q_idx;
            plan.groups.push_back(std::move(grp));
        }
    return plan;
}

AttentionPlan sparse_plan_over_frames(const TokenGrid& q, const TokenGrid& k, int heads,
                                      const WindowPartition& part, int top_k,
                                      const std::vector<int>& frames) {
    check(part.hg == q.hg && part.wg == q.wg, "sparse attention: partition/grid mismatch");
    int d = q.dmodel();
    check(heads > 0 && d % heads == 0, "sparse attention: D must be divisible by heads");
    int fsz = q.frame_tokens();

    // Windows across all covered frames, in (frame, window) order.
    std::vector<std::vector<int>> wins;
    for (int f : frames)
        for (const auto& win : part.windows) {
            std::vector<int> glob;
            glob.reserve(win.size());
            for (int idx : win) glob.push_back(f * fsz + idx);
            wins.push_back(std::move(glob));
        }
    int numwin = static_cast<int>(wins.size());
    check(top_k >= 0 && top_k < numwin, "sparse attention: top_k must be in [0, windows)");

    // Window-mean pooled queries and keys. The per-head relevance
    // dot products summed over heads equal one D-length dot product.
    Tensor pq(Shape{numwin, d}), pk(Shape{numwin, d});
    for (int w = 0; w < numwin; ++w) {
        for (int c = 0; c < d; ++c) {
            double aq = 0.0, ak = 0.0;
            for (int tok : wins[static_cast<size_t>(w)]) {
                aq += q.tokens.ptr()[static_cast<int64_t>(tok) * d + c];
                ak += k.tokens.ptr()[static_cast<int64_t>(tok) * d + c];
            }
            double inv = 1.0 / static_cast<double>(wins[static_cast<size_t>(w)].size());
            pq.at(w, c) = static_cast<float>(aq * inv);
            pk.at(w, c) = static_cast<float>(ak * inv);
        }
    }

    AttentionPlan plan;
    plan.groups.resize(static_cast<size_t>(numwin));
    parallel_for(numwin, [&](int64_t a) {
        std::vector<std::pair<float, int>> scored;
        scored.reserve(static_cast<size_t>(numwin) - 1);
        for (int b = 0; b < numwin; ++b) {
            if (b == static_cast<int>(a)) continue;
            float r = dotf(pq.ptr() + a * d, pk.ptr() + static_cast<int64_t>(b) * d, d) /
                      static_cast<float>(heads);
            scored.emplace_back(r, b);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& lhs, const auto& rhs) {
            if (lhs.first != rhs.first) return lhs.first > rhs.first;
            return lhs.second < rhs.second;  // deterministic tie-break
        });
        std::vector<int> chosen{static_cast<int>(a)};
        for (int i = 0; i < top_k; ++i) chosen.push_back(scored[static_cast<size_t>(i)].second);
        std::sort(chosen.begin(), chosen.end());
        AttentionGroup grp;
        grp.q_idx = wins[static_cast<size_t>(a)];
        for (int b : chosen)
            grp.kv_idx.insert(grp.kv_idx.end(), wins[static_cast<size_t>(b)].begin(),
                              wins[static_cast<size_t>(b)].end());
        plan.groups[static_cast<size_t>(a)] = std::move(grp);
    });
    return plan;
}

AttentionPlan full_plan(const TokenGrid& g) { return full_plan_over_frames(g, all_frames(g.tl)); }

AttentionPlan swin_plan(const TokenGrid& g, const WindowPartition& part, bool shifted) {
    return swin_plan_over_frames(g, part, shifted, all_frames(g.tl));
}

AttentionPlan sparse_local_plan(const TokenGrid& q, const TokenGrid& k, int heads,
                                const WindowPartition& part, int top_k) {
    return sparse_plan_over_frames(q, k, heads, part, top_k, all_frames(q.tl));
}

AttentionPlan interleaved_plan(const TokenGrid& q, const TokenGrid& k, int heads,
                               const TemporalUnitPlan& tplan, int layer_index, AttnMode mode,
                               const WindowPartition& part, int top_k, bool swin_shifted) {
    auto units = temporal_units(q.tl, tplan.unit, tplan.shift_for_layer(layer_index));
    AttentionPlan merged;
    for (const auto& frames : units) {
        AttentionPlan sub;
        switch (mode) {
            case AttnMode::kFull: sub = full_plan_over_frames(q, frames); break;
            case AttnMode::kSwin: sub = swin_plan_over_frames(q, part, swin_shifted, frames); break;
            case AttnMode::kSparseLocal:
                sub = sparse_plan_over_frames(q, k, heads, part,
                                              std::min(top_k, static_cast<int>(frames.size() *
                                                                               part.windows.size()) -
                                                                  1),
                                              frames);
                break;
        }
        for (auto& g : sub.groups) merged.groups.push_back(std::move(g));
    }
    return merged;
}

// ---------------------------------------------------------------------------
// attention ops
// ---------------------------------------------------------------------------

Tensor full_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                      AttendCapture* capture) {
    return attend(q.tokens, k.tokens, v.tokens, heads, full_plan(q), capture);
}

Tensor swin_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                      const WindowPartition& part, bool shifted, AttendCapture* capture) {
    return attend(q.tokens, k.tokens, v.tokens, heads, swin_plan(q, part, shifted), capture);
}

Tensor sparse_local_attention(const TokenGrid& q, const TokenGrid& k, const TokenGrid& v, int heads,
                              const WindowPartition& part, int top_k, AttendCapture* capture) {
    return attend(q.tokens, k.tokens, v.tokens, heads,
                  sparse_local_plan(q, k, heads, part, top_k), capture);
}

Tensor interleaved_temporal_wrap(const UnitAttnOp& op, const TokenGrid& q, const TokenGrid& k,
                                 const TokenGrid& v, const TemporalUnitPlan& tplan,
                                 int layer_index) {
    check(tplan.unit > 0, "temporal wrap: unit length must be positive");
    check(same_shape(q.tokens.shape, k.tokens.shape) && same_shape(q.tokens.shape, v.tokens.shape),
          "temporal wrap: q/k/v shape mismatch");
    auto units = temporal_units(q.tl, tplan.unit, tplan.shift_for_layer(layer_index));
    int fsz = q.frame_tokens(), d = q.dmodel();
    Tensor out(q.tokens.shape);
    for (const auto& frames : units) {
        int ut = static_cast<int>(frames.size());
        Tensor uq(Shape{ut * fsz, d}), uk(Shape{ut * fsz, d}), uv(Shape{ut * fsz, d});
        for (int i = 0; i < ut; ++i) {
            int64_t src = static_cast<int64_t>(frames[static_cast<size_t>(i)]) * fsz * d;
            int64_t dst = static_cast<int64_t>(i) * fsz * d;
            std::copy_n(q.tokens.ptr() + src, static_cast<int64_t>(fsz) * d, uq.ptr() + dst);
            std::copy_n(k.tokens.ptr() + src, static_cast<int64_t>(fsz) * d, uk.ptr() + dst);
            std::copy_n(v.tokens.ptr() + src, static_cast<int64_t>(fsz) * d, uv.ptr() + dst);
        }
        Tensor r = op(TokenGrid(ut, q.hg, q.wg, std::move(uq)),
                      TokenGrid(ut, q.hg, q.wg, std::move(uk)),
                      TokenGrid(ut, q.hg, q.wg, std::move(uv)));
        check_runtime(r.ndim() == 2 && r.dim(0) == ut * fsz && r.dim(1) == d,
                      "temporal wrap: unit op changed the token shape");
        for (int i = 0; i < ut; ++i)
            std::copy_n(r.ptr() + static_cast<int64_t>(i) * fsz * d,
                        static_cast<int64_t>(fsz) * d,
                        out.ptr() + static_cast<int64_t>(frames[static_cast<size_t>(i)]) * fsz * d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// analytic FLOPs + bench
// ---------------------------------------------------------------------------

FlopReport count_flops(int tl, int hg, int wg, int d, int heads, AttnMode mode, int window_h,
                       int window_w, int top_k) {
    check(tl > 0 && hg > 0 && wg > 0 && d > 0 && heads > 0 && d % heads == 0,
          "flop count: bad geometry");
    double n = static_cast<double>(tl) * hg * wg;
    double dd = static_cast<double>(d);
    FlopReport r;
    r.projection_flops = 8.0 * n * dd * dd;
    double full_total = 4.0 * n * n * dd;
    switch (mode) {
        case AttnMode::kFull:
            r.attention_flops = full_total;
            break;
        case AttnMode::kSwin: {
            auto part = make_windows(hg, wg, window_h, window_w);
            double acc = 0.0;
            for (const auto& win : part.windows) {
                double nw = static_cast<double>(win.size());
                acc += 4.0 * nw * nw * dd;
            }
            r.attention_flops = acc * tl;
            break;
        }
        case AttnMode::kSparseLocal: {
            auto part = make_windows(hg, wg, window_h, window_w);
            double numwin = static_cast<double>(part.windows.size()) * tl;
            double mean_w = n / numwin;
            double acc = 0.0;
            for (const auto& win : part.windows) {
                double nw = static_cast<double>(win.size());
                acc += 4.0 * nw * (nw + static_cast<double>(top_k) * mean_w) * dd;
            }
            r.attention_flops = acc * tl;
            r.relevance_flops = 2.0 * numwin * numwin * dd;
            break;
        }
    }
    r.ratio_vs_full = r.total() / full_total;
    return r;
}

std::vector<BenchRow> bench_attention(const std::vector<AttnMode>& modes,
                                      const std::vector<std::array<int, 3>>& sizes,
                                      const BenchConfig& cfg) {
    check(cfg.repetitions >= 1, "bench: need at least one repetition");
    std::vector<BenchRow> rows;
    Rng rng(cfg.seed, 0);
    for (AttnMode mode : modes)
        for (const auto& sz : sizes) {
            int tl = sz[0], hg = sz[1], wg = sz[2];
            TokenGrid q(tl, hg, wg, randn(rng, Shape{tl * hg * wg, cfg.d}));
            TokenGrid k(tl, hg, wg, randn(rng, Shape{tl * hg * wg, cfg.d}));
            TokenGrid v(tl, hg, wg, randn(rng, Shape{tl * hg * wg, cfg.d}));
            auto part = make_windows(hg, wg, cfg.window_h, cfg.window_w);
            int top_k = std::min(cfg.top_k, static_cast<int>(part.windows.size()) * tl - 1);
            std::vector<double> times;
            double sink = 0.0;
            for (int rep = 0; rep < cfg.repetitions; ++rep) {
                auto t0 = std::chrono::steady_clock::now();
                Tensor out;
                switch (mode) {
                    case AttnMode::kFull: out = full_attention(q, k, v, cfg.heads); break;
                    case AttnMode::kSwin:
                        out = swin_attention(q, k, v, cfg.heads, part, false);
                        break;
                    case AttnMode::kSparseLocal:
                        out = sparse_local_attention(q, k, v, cfg.heads, part, top_k);
                        break;
                }
                auto t1 = std::chrono::steady_clock::now();
                sink += out.data[0];
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
            std::sort(times.begin(), times.end());
            BenchRow row;
            row.mode = mode;
            row.tl = tl;
            row.hg = hg;
            row.wg = wg;
            row.d = cfg.d;
            row.heads = cfg.heads;
            row.window_h = part.wh;
            row.window_w = part.ww;
            row.top_k = top_k;
            row.analytic_flops =
                count_flops(tl, hg, wg, cfg.d, cfg.heads, mode, part.wh, part.ww, top_k).total();
            row.wall_ms = times[times.size() / 2];
            if (!std::isfinite(sink)) row.wall_ms = -1.0;  // keep the compute alive
            rows.push_back(row);
        }
    return rows;
}

}  // namespace gvr
