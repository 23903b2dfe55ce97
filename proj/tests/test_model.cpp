// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "gvr/dataset.hpp"
#include "gvr/media_io.hpp"
#include "gvr/model.hpp"
#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"
#include "oracles.hpp"

using namespace gvr;
namespace fs = std::filesystem;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return same_shape(a.shape, b.shape) &&
           std::memcmp(a.ptr(), b.ptr(), sizeof(float) * a.data.size()) == 0;
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "gvrlab_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small config that exercises every path while keeping forwards cheap.
GvrConfig tiny_config() {
    GvrConfig cfg;
    cfg.latent_channels = 6;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.depth = 2;
    cfg.window_h = 2;
    cfg.window_w = 2;
    cfg.top_k = 1;
    cfg.temporal_unit = 2;
    cfg.upsample = 2;
    cfg.text_dim = 4;
    cfg.cond_kernel_t = 1;
    cfg.ff_mult = 2;
    return cfg;
}

Latent latent_of(Tensor data) {
    Latent lat;
    lat.data = std::move(data);
    return lat;
}

// Random dataset where the LR side is a bilinear reduction of the HR side,
// so the conditioning actually predicts the target.
std::vector<TrainBatch> toy_batches(const GvrConfig& cfg, int n, int tl, int hl, int wl,
                                    uint64_t seed) {
    std::vector<TrainBatch> out;
    Rng rng(seed, 777);
    for (int i = 0; i < n; ++i) {
        TrainBatch b;
        Tensor z = randn(rng, Shape{tl, cfg.latent_channels, hl, wl});
        b.z0 = latent_of(z);
        b.c0 = latent_of(bilinear_resize(z, hl / cfg.upsample, wl / cfg.upsample));
        out.push_back(std::move(b));
    }
    return out;
}

double mean_loss(const std::vector<LossRow>& rows, size_t lo, size_t hi) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += rows[i].loss;
    return s / static_cast<double>(hi - lo);
}

}  // namespace

TEST_CASE("config validation, canonical round trip, digest") {
    GvrConfig cfg;
    cfg.validate();

    GvrConfig bad = cfg;
    bad.depth = 3;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("even"), ValidationError);
    bad = cfg;
    bad.width = 30;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("divisible"), ValidationError);
    bad = cfg;
    bad.aug_lo = 0.7;
    bad.aug_hi = 0.2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.cond_kernel_t = 2;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("odd"), ValidationError);

    cfg.attn_mode = AttnMode::kSparseLocal;
    cfg.sampler = SamplerKind::kDetailAware;
    cfg.aug_lo = 0.25;
    cfg.temporal_shifts = false;
    std::string canon = cfg.canonical();
    GvrConfig back = parse_canonical_config(canon);
    CHECK(back.canonical() == canon);
    CHECK(back.digest() == cfg.digest());

    CHECK_THROWS_WITH_AS(parse_canonical_config(canon + ";zz=1"), doctest::Contains("zz"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(parse_canonical_config("width=8"), doctest::Contains("missing"),
                         ValidationError);
}

TEST_CASE("forward output shape matches the noisy latent on varied configs") {
    struct Case {
        int cl, width, heads, depth, up, tl, hl, wl;
        AttnMode mode;
    };
    const Case cases[] = {
        {4, 8, 2, 2, 2, 2, 4, 4, AttnMode::kFull},
        {6, 12, 3, 2, 1, 3, 3, 5, AttnMode::kSwin},
        {3, 8, 1, 4, 2, 1, 2, 6, AttnMode::kSparseLocal},
        {5, 16, 4, 2, 3, 2, 3, 3, AttnMode::kFull},
        {8, 6, 2, 2, 1, 4, 5, 2, AttnMode::kSparseLocal},
    };
    int idx = 0;
    for (const Case& c : cases) {
        GvrConfig cfg = tiny_config();
        cfg.latent_channels = c.cl;
        cfg.width = c.width;
        cfg.heads = c.heads;
        cfg.depth = c.depth;
        cfg.upsample = c.up;
        cfg.attn_mode = c.mode;
        Rng rng(40 + idx);
        GvrModel model = init_model(cfg, rng);
        Tensor z = randn(rng, Shape{c.tl, c.cl, c.hl * c.up, c.wl * c.up});
        Tensor cond = randn(rng, Shape{c.tl, c.cl, c.hl, c.wl});
        Tensor text = idx % 2 == 0 ? Tensor{} : randn(rng, Shape{cfg.text_dim});
        Tensor v = model.forward(z, 0.4, cond, 0.45, text);
        CHECK(same_shape(v.shape, z.shape));
        CHECK(v.all_finite());
        ++idx;
    }

    GvrConfig cfg = tiny_config();
    Rng rng(3);
    GvrModel model = init_model(cfg, rng);
    Tensor z = randn(rng, Shape{2, cfg.latent_channels, 4, 4});
    Tensor cond = randn(rng, Shape{2, cfg.latent_channels, 2, 2});
    CHECK_THROWS_WITH_AS(model.forward(z, 0.5, randn(rng, Shape{2, cfg.latent_channels, 3, 2}),
                                       0.4),
                         doctest::Contains("upsample"), ValidationError);
    CHECK_THROWS_AS(model.forward(z, 1.5, cond, 0.4), ValidationError);
    CHECK_THROWS_AS(model.forward(z, 0.5, cond, 0.4, randn(rng, Shape{3})), ValidationError);
}

TEST_CASE("fresh model predicts exactly zero velocity and the baseline loss") {
    GvrConfig cfg = tiny_config();
    Rng rng(7);
    GvrModel model = init_model(cfg, rng);

    Tensor z0 = randn(rng, Shape{2, cfg.latent_channels, 4, 4});
    Tensor eps = randn(rng, z0.shape);
    Tensor cond = randn(rng, Shape{2, cfg.latent_channels, 2, 2});
    FlowState state = add_noise(z0, 0.3, eps);
    Tensor v = model.forward(state.z_t, 0.3, cond, 0.45);
    CHECK(max_abs(v) == 0.0);

    // v == 0 makes the matching loss the E||eps - z0||^2 baseline exactly.
    ModelVelocity field(model, 0.45);
    double loss = cfm_loss(field, z0, eps, 0.3, cond);
    Tensor target = sub(eps, z0);
    double baseline = mse(target, Tensor(target.shape));
    CHECK(std::abs(loss - baseline) <= 1e-12);
}

TEST_CASE("full-model gradient matches finite differences") {
    GvrConfig cfg = tiny_config();
    cfg.width = 16;
    cfg.depth = 2;
    cfg.attn_mode = AttnMode::kFull;
    Rng rng(11);
    GvrModel model = init_model(cfg, rng);
    // The zero-initialized groups (modulation, output projection) would hide
    // their gradients at the exact init point; shake every block first.
    for (ParamBlock& p : model.params)
        p.value = add_scaled(p.value, randn(rng, p.value.shape), 0.05f);

    const int tl = 2, hl = 2, wl = 2;
    Tensor z_t = randn(rng, Shape{tl, cfg.latent_channels, hl * 2, wl * 2});
    Tensor cond = randn(rng, Shape{tl, cfg.latent_channels, hl, wl});
    Tensor text = randn(rng, Shape{cfg.text_dim});
    const double t = 0.37, a = 0.45;
    // Keep the target near the current output: the finite differences then sit
    // well above float rounding while the Jacobian under test is unchanged.
    Tensor v0 = model.forward(z_t, t, cond, a, text);
    Tensor target = add_scaled(v0, randn(rng, z_t.shape), 0.15f);

    std::vector<Tensor> grads;
    loss_and_grads(model, z_t, t, cond, a, text, target, &grads);
    REQUIRE(grads.size() == model.params.size());

    std::vector<Tensor> values;
    for (const ParamBlock& p : model.params) values.push_back(p.value);
    auto loss_fn = [&](const std::vector<Tensor>& work) {
        GvrModel probe = model;
        for (size_t i = 0; i < work.size(); ++i) probe.params[i].value = work[i];
        return loss_and_grads(probe, z_t, t, cond, a, text, target, nullptr);
    };
    double rel = oracle::fd_relative_error(loss_fn, values, grads, 3e-3);
    CHECK(rel <= 1e-3);
}

TEST_CASE("training is deterministic and aborts on non-finite loss") {
    GvrConfig cfg = tiny_config();
    auto dataset = toy_batches(cfg, 3, 2, 4, 4, 5);
    TrainOptions opt;
    opt.steps = 6;
    opt.lr = 1e-3;
    opt.seed = 11;

    fs::path dir = scratch_dir("model_train");
    opt.loss_csv = (dir / "loss.csv").string();

    Rng r1(21);
    GvrModel m1 = init_model(cfg, r1);
    TrainResult t1 = train(m1, dataset, opt);

    set_workers(4);
    Rng r2(21);
    GvrModel m2 = init_model(cfg, r2);
    TrainResult t2 = train(m2, dataset, opt);
    set_workers(1);

    REQUIRE(t1.rows.size() == 6);
    REQUIRE(t2.rows.size() == 6);
    for (size_t i = 0; i < t1.rows.size(); ++i) {
        CHECK(t1.rows[i].loss == t2.rows[i].loss);
        CHECK(t1.rows[i].timestep_drawn == t2.rows[i].timestep_drawn);
        CHECK(t1.rows[i].aug_level == t2.rows[i].aug_level);
    }
    for (size_t i = 0; i < m1.params.size(); ++i)
        CHECK(bitwise_equal(m1.params[i].value, m2.params[i].value));

    CsvTable csv = read_report(opt.loss_csv);
    REQUIRE(csv.columns.size() == 4);
    CHECK(csv.columns[0] == "step");
    CHECK(csv.columns[1] == "loss");
    CHECK(csv.columns[2] == "timestep_drawn");
    CHECK(csv.columns[3] == "aug_level");
    CHECK(csv.rows.size() == 6);

    Rng r3(21);
    GvrModel m3 = init_model(cfg, r3);
    m3.param("in_proj.w")[0] = std::numeric_limits<float>::infinity();
    TrainOptions bad = opt;
    bad.loss_csv.clear();
    CHECK_THROWS_WITH_AS(train(m3, dataset, bad), doctest::Contains("step 0"), NumericError);
}

TEST_CASE("text dropout nulls ten percent of prompts") {
    Rng rng(123);
    int nulls = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        if (text_dropout_draw(rng)) ++nulls;
    double frac = static_cast<double>(nulls) / n;
    CHECK(frac >= 0.09);
    CHECK(frac <= 0.11);
}

TEST_CASE("a short training run reduces the matching loss") {
    GvrConfig cfg = tiny_config();
    cfg.width = 16;
    auto dataset = toy_batches(cfg, 4, 2, 4, 4, 9);
    TrainOptions opt;
    opt.steps = 80;
    opt.lr = 3e-3;
    opt.seed = 4;
    Rng rng(30);
    GvrModel model = init_model(cfg, rng);
    TrainResult res = train(model, dataset, opt);
    double head = mean_loss(res.rows, 0, 20);
    double tail = mean_loss(res.rows, 60, 80);
    CHECK(tail < head);
}

TEST_CASE("infer: shape, determinism, condition fixity") {
    GvrConfig cfg = tiny_config();
    Rng rng(15);
    GvrModel model = init_model(cfg, rng);
    for (ParamBlock& p : model.params)
        p.value = add_scaled(p.value, randn(rng, p.value.shape), 0.05f);

    Latent c0 = latent_of(randn(rng, Shape{2, cfg.latent_channels, 3, 3}));

    Rng ra(99);
    Latent out_a = infer(model, c0, 4, 0.45, ra);
    CHECK(out_a.data.ndim() == 4);
    CHECK(out_a.data.dim(0) == 2);
    CHECK(out_a.data.dim(1) == cfg.latent_channels);
    CHECK(out_a.data.dim(2) == 6);
    CHECK(out_a.data.dim(3) == 6);
    CHECK(out_a.data.all_finite());

    Rng rb(99);
    Latent out_b = infer(model, c0, 4, 0.45, rb);
    CHECK(bitwise_equal(out_a.data, out_b.data));

    Rng rc(100);
    Latent out_c = infer(model, c0, 4, 0.45, rc);
    CHECK(max_abs_diff(out_a.data, out_c.data) > 0.0);

    Rng rd(1);
    CHECK_THROWS_AS(infer(model, c0, 4, 1.5, rd), ValidationError);

    ModelVelocity field(model, 0.45);
    Tensor cond1 = randn(rng, Shape{2, cfg.latent_channels, 3, 3});
    Tensor cond2 = randn(rng, Shape{2, cfg.latent_channels, 3, 3});
    Tensor z = randn(rng, Shape{2, cfg.latent_channels, 6, 6});
    field.evaluate(z, 0.9, cond1);
    field.evaluate(z, 0.8, cond1);
    CHECK_THROWS_WITH_AS(field.evaluate(z, 0.7, cond2), doctest::Contains("changed"),
                         RuntimeError);
}

TEST_CASE("collect_traces: lengths, worker invariance, degenerate oracle") {
    GvrConfig cfg = tiny_config();
    Rng rng(17);
    GvrModel model = init_model(cfg, rng);
    for (ParamBlock& p : model.params)
        p.value = add_scaled(p.value, randn(rng, p.value.shape), 0.05f);

    std::vector<Latent> lats;
    for (int i = 0; i < 3; ++i)
        lats.push_back(latent_of(randn(rng, Shape{2, cfg.latent_channels, 2, 2})));

    auto traces = collect_traces(model, lats, 5, 0.45, 77);
    REQUIRE(traces.size() == 3);
    for (const InferenceTrace& tr : traces) CHECK(tr.pred_clean.size() == 5);

    set_workers(4);
    auto traces4 = collect_traces(model, lats, 5, 0.45, 77);
    set_workers(1);
    for (size_t i = 0; i < traces.size(); ++i)
        for (size_t s = 0; s < traces[i].pred_clean.size(); ++s)
            CHECK(bitwise_equal(traces[i].pred_clean[s], traces4[i].pred_clean[s]));

    // Under the exact linear-path field every clean prediction equals z0, so
    // the detail-aware construction must report the degenerate trace.
    Rng orng(5);
    Tensor z0 = randn(orng, Shape{1, 2, 4, 4});
    Tensor eps = randn(orng, z0.shape);
    OracleLinearVelocity oracle_field(z0, eps);
    std::vector<InferenceTrace> otr(2);
    for (auto& tr : otr) {
        Rng r(8);
        ode_sample(oracle_field, eps, 4, Tensor{}, r, &tr);
    }
    CHECK_THROWS_WITH_AS(build_detail_aware_sampler(otr, 0.5),
                         doctest::Contains("degenerate"), ValidationError);
}

TEST_CASE("attention modes agree when the geometry saturates") {
    // One latent frame, window covering the whole grid, top_k saturated: all
    // three modes see exactly the same token set.
    GvrConfig base = tiny_config();
    base.window_h = 4;
    base.window_w = 4;
    base.top_k = 0;

    std::vector<Tensor> outs;
    for (AttnMode mode : {AttnMode::kFull, AttnMode::kSwin, AttnMode::kSparseLocal}) {
        GvrConfig cfg = base;
        cfg.attn_mode = mode;
        Rng rng(77);
        GvrModel model = init_model(cfg, rng);
        for (ParamBlock& p : model.params)
            p.value = add_scaled(p.value, randn(rng, p.value.shape), 0.05f);
        Rng drng(5);
        Tensor z = randn(drng, Shape{1, cfg.latent_channels, 4, 4});
        Tensor cond = randn(drng, Shape{1, cfg.latent_channels, 2, 2});
        outs.push_back(model.forward(z, 0.6, cond, 0.4));
    }
    CHECK(max_abs_diff(outs[0], outs[1]) <= 1e-4);
    CHECK(max_abs_diff(outs[0], outs[2]) <= 1e-4);
}

TEST_CASE("temporal extension keeps parameters and matches per-unit stitching") {
    GvrConfig cfg = tiny_config();
    cfg.upsample = 1;
    cfg.latent_channels = 4;
    cfg.temporal_unit = 5;
    Rng rng(19);
    GvrModel model = init_model(cfg, rng);
    int64_t count_before = model.param_count();

    GvrConfig long_cfg = cfg;
    long_cfg.attn_mode = AttnMode::kSparseLocal;
    long_cfg.temporal_unit = 5;

    std::vector<TrainBatch> long_data;
    {
        Rng drng(23);
        TrainBatch b;
        Tensor z = randn(drng, Shape{10, cfg.latent_channels, 3, 3});
        b.z0 = latent_of(z);
        b.c0 = latent_of(z);
        long_data.push_back(std::move(b));
    }
    TrainOptions opt;
    opt.steps = 1;
    opt.lr = 1e-4;
    TrainResult res = extend_temporal(model, long_cfg, long_data, opt);
    CHECK(res.rows.size() == 1);
    CHECK(model.param_count() == count_before);
    CHECK(model.config.attn_mode == AttnMode::kSparseLocal);

    // Too-short latents must be refused.
    std::vector<TrainBatch> short_data;
    {
        Rng drng(29);
        TrainBatch b;
        Tensor z = randn(drng, Shape{3, cfg.latent_channels, 3, 3});
        b.z0 = latent_of(z);
        b.c0 = latent_of(z);
        short_data.push_back(std::move(b));
    }
    CHECK_THROWS_WITH_AS(extend_temporal(model, long_cfg, short_data, opt),
                         doctest::Contains("shorter than the temporal unit"), ValidationError);

    // A config that changes parameter shapes is rejected.
    GvrConfig fat = long_cfg;
    fat.width = 16;
    CHECK_THROWS_WITH_AS(extend_temporal(model, fat, long_data, opt),
                         doctest::Contains("parameter set"), ValidationError);

    // Block-diagonal equivalence: with frame-separable convs, shifts off and
    // full attention inside units, the forward of a long latent equals the
    // stitched forwards of its units.
    GvrConfig sep = tiny_config();
    sep.upsample = 1;
    sep.latent_channels = 4;
    sep.temporal_unit = 2;
    sep.temporal_shifts = false;
    sep.cond_kernel_t = 1;
    sep.attn_mode = AttnMode::kFull;
    Rng srng(31);
    GvrModel sep_model = init_model(sep, srng);
    for (ParamBlock& p : sep_model.params)
        p.value = add_scaled(p.value, randn(srng, p.value.shape), 0.05f);

    Rng drng(37);
    Tensor z = randn(drng, Shape{4, sep.latent_channels, 3, 3});
    Tensor cond = randn(drng, Shape{4, sep.latent_channels, 3, 3});
    Tensor whole = sep_model.forward(z, 0.5, cond, 0.4);

    Tensor stitched(whole.shape);
    const int64_t frame_elems = static_cast<int64_t>(sep.latent_channels) * 3 * 3;
    for (int u = 0; u < 2; ++u) {
        Tensor zu(Shape{2, sep.latent_channels, 3, 3});
        Tensor cu(zu.shape);
        std::memcpy(zu.ptr(), z.ptr() + u * 2 * frame_elems, sizeof(float) * zu.data.size());
        std::memcpy(cu.ptr(), cond.ptr() + u * 2 * frame_elems,
                    sizeof(float) * cu.data.size());
        Tensor vu = sep_model.forward(zu, 0.5, cu, 0.4);
        std::memcpy(stitched.ptr() + u * 2 * frame_elems, vu.ptr(),
                    sizeof(float) * vu.data.size());
    }
    CHECK(max_abs_diff(whole, stitched) <= 1e-6);
}

TEST_CASE("checkpoints round trip and reject corruption") {
    GvrConfig cfg = tiny_config();
    cfg.attn_mode = AttnMode::kSwin;
    Rng rng(41);
    GvrModel model = init_model(cfg, rng);
    for (ParamBlock& p : model.params)
        p.value = add_scaled(p.value, randn(rng, p.value.shape), 0.05f);

    fs::path dir = scratch_dir("model_ckpt");
    std::string path = (dir / "model.gvrm").string();
    save_checkpoint(model, path);

    GvrModel back = load_checkpoint(path);
    CHECK(back.config.canonical() == model.config.canonical());
    REQUIRE(back.params.size() == model.params.size());
    for (size_t i = 0; i < back.params.size(); ++i) {
        CHECK(back.params[i].name == model.params[i].name);
        CHECK(bitwise_equal(back.params[i].value, model.params[i].value));
    }
    Rng drng(43);
    Tensor z = randn(drng, Shape{2, cfg.latent_channels, 4, 4});
    Tensor cond = randn(drng, Shape{2, cfg.latent_channels, 2, 2});
    CHECK(bitwise_equal(model.forward(z, 0.4, cond, 0.45), back.forward(z, 0.4, cond, 0.45)));

    auto bytes = read_file_bytes(path);
    auto corrupt = [&](size_t at, unsigned char v, const std::string& name) {
        auto copy = bytes;
        copy[at] = v;
        std::string p2 = (dir / name).string();
        write_file_bytes(p2, copy.data(), copy.size());
        return p2;
    };
    CHECK_THROWS_WITH_AS(load_checkpoint(corrupt(0, 'X', "bad_magic.gvrm")),
                         doctest::Contains("not a GVRM"), RuntimeError);
    // Flip one byte inside the embedded config text: the digest must catch it.
    CHECK_THROWS_WITH_AS(load_checkpoint(corrupt(21, 'Z', "bad_cfg.gvrm")),
                         doctest::Contains("digest"), RuntimeError);
    std::string trunc = (dir / "trunc.gvrm").string();
    write_file_bytes(trunc, bytes.data(), bytes.size() - 5);
    CHECK_THROWS_WITH_AS(load_checkpoint(trunc), doctest::Contains("truncated"), RuntimeError);
    auto extra = bytes;
    extra.push_back(0);
    std::string trail = (dir / "trail.gvrm").string();
    write_file_bytes(trail, extra.data(), extra.size());
    CHECK_THROWS_WITH_AS(load_checkpoint(trail), doctest::Contains("trailing"), RuntimeError);
}

TEST_CASE("synthetic dataset: ranges, determinism, pair geometry") {
    // 64x64 keeps the low-res side at 32x32, the smallest extent the optical
    // flow estimator in the degradation chain accepts.
    SyntheticSpec spec;
    spec.frames = 5;
    spec.h = 64;
    spec.w = 64;
    Clip a = synthetic_clip(spec, 6, 0);
    Clip b = synthetic_clip(spec, 6, 0);
    Clip c = synthetic_clip(spec, 6, 1);
    CHECK(bitwise_equal(a.frames, b.frames));
    CHECK(max_abs_diff(a.frames, c.frames) > 0.0);
    for (float v : a.frames.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }

    TrainBatch batch = one_order_batch(a, 2);
    CHECK(batch.z0.tl() == 2);
    CHECK(batch.z0.cl() == 768);
    CHECK(batch.z0.hl() == 8);
    CHECK(batch.c0.hl() == 4);
    GvrConfig cfg;  // desk default: 768 channels, x2
    validate_batch(batch, cfg, "test");

    auto stage1 = make_stage1_batches(spec, 2, 2, 6);
    CHECK(stage1.size() == 2);
    CHECK(bitwise_equal(stage1[0].z0.data, batch.z0.data));

    Stage2Options s2;
    s2.sdedit_steps = 2;
    auto stage2 = make_stage2_batches(spec, 1, s2, 6);
    REQUIRE(stage2.size() == 1);
    CHECK(same_shape(stage2[0].c0.data.shape, stage1[0].c0.data.shape));
    CHECK(bitwise_equal(stage2[0].z0.data, stage1[0].z0.data));
    // The degradation chain must actually corrupt the conditioning side.
    CHECK(max_abs_diff(stage2[0].c0.data, stage1[0].c0.data) > 0.0);

    // PSNR sanity: identity is infinite, a 0.1 offset lands at 20 dB.
    CHECK(psnr(a.frames, a.frames) == std::numeric_limits<double>::infinity());
    Tensor off(a.frames.shape, 0.1f);
    CHECK(std::abs(psnr(off, Tensor(off.shape)) - 20.0) <= 1e-5);

    Clip up = bilinear_upsample_clip(Clip(bicubic_resize_thwc(a.frames, 32, 32), 24.0), 2);
    CHECK(up.h() == 64);
    CHECK(up.w() == 64);
}
