// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "gvr/attention.hpp"
#include "gvr/common.hpp"
#include "gvr/config.hpp"
#include "gvr/curation.hpp"
#include "gvr/dataset.hpp"
#include "gvr/degrade.hpp"
#include "gvr/flow_match.hpp"
#include "gvr/latent.hpp"
#include "gvr/media_io.hpp"
#include "gvr/model.hpp"
#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"
#include "gvr/tape.hpp"

namespace gvr {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::vector<std::string> list_y4m(const std::string& dir) {
    check(fs::is_directory(dir), "'" + dir + "' is not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".y4m")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    check(!paths.empty(), "no .y4m clips in '" + dir + "'");
    return paths;
}

PipelineConfig config_or_default(const std::string& path) {
    if (path.empty()) {
        PipelineConfig cfg;
        validate_pipeline_config(cfg);
        return cfg;
    }
    return load_pipeline_config(path);
}

// A model velocity with the conditioning latent and augmentation level pinned,
// so it can stand in wherever an unconditional field is expected (the SDEdit
// prior in particular).
class ConditionedField : public VelocityField {
  public:
    ConditionedField(const GvrModel& model, Tensor condition, double aug_level)
        : inner_(model, aug_level), cond_(std::move(condition)) {}

    Tensor evaluate(const Tensor& z_t, double t, const Tensor&) const override {
        return inner_.evaluate(z_t, t, cond_);
    }

  private:
    ModelVelocity inner_;
    Tensor cond_;
};

void require_codec_shaped(const GvrModel& model, const char* what) {
    CodecDesc codec;
    check(model.config.latent_channels == codec.cl(),
          std::string(what) + ": checkpoint has " +
              std::to_string(model.config.latent_channels) +
              " latent channels but the codec needs " + std::to_string(codec.cl()));
}

// ---------------------------------------------------------------------------
// degrade flow / degrade sdedit
// ---------------------------------------------------------------------------

void cmd_degrade_flow(const std::string& in, const std::string& out,
                      const std::string& config_path, uint64_t seed) {
    PipelineConfig cfg = config_or_default(config_path);
    std::vector<std::string> paths = list_y4m(in);
    fs::create_directories(out);
    for (size_t i = 0; i < paths.size(); ++i) {
        Clip clip = read_clip(paths[i]);
        Clip degraded = degrade_clip(clip, cfg.flow_degrade, Rng(seed, i));
        const std::string dst = (fs::path(out) / fs::path(paths[i]).filename()).string();
        write_clip(degraded, dst);
    }
    std::printf("degraded %zu clips -> %s\n", paths.size(), out.c_str());
}

void cmd_degrade_sdedit(const std::string& in, const std::string& out, double alpha, int steps,
                        const std::string& model_path, double aug, uint64_t seed) {
    std::vector<std::string> paths = list_y4m(in);
    fs::create_directories(out);

    GvrModel model;
    const bool use_model = !model_path.empty();
    if (use_model) {
        model = load_checkpoint(model_path);
        require_codec_shaped(model, "degrade sdedit");
        check(model.config.upsample == 1,
              "degrade sdedit: the prior must be an x1-upsample checkpoint (got x" +
                  std::to_string(model.config.upsample) + ")");
    }
    ContractiveToyVelocity toy;

    for (size_t i = 0; i < paths.size(); ++i) {
        Clip clip = read_clip(paths[i]);
        Latent c0 = encode(clip);
        std::unique_ptr<VelocityField> field;
        if (use_model)
            field = std::make_unique<ConditionedField>(model, c0.data, aug);
        Rng rng(seed, 200000 + i);
        Latent degraded =
            sdedit_degrade(use_model ? *field : static_cast<const VelocityField&>(toy), c0,
                           alpha, steps, rng);
        const std::string dst = (fs::path(out) / fs::path(paths[i]).filename()).string();
        write_clip(clamp01(decode(degraded)), dst);
    }
    std::printf("sdedit-degraded %zu clips -> %s\n", paths.size(), out.c_str());
}

// ---------------------------------------------------------------------------
// curate
// ---------------------------------------------------------------------------

void cmd_curate(const std::string& dir, const std::string& report,
                const std::string& config_path) {
    PipelineConfig cfg = config_or_default(config_path);
    std::vector<CurationVerdict> verdicts = curate_directory(dir, cfg.curation);
    write_curation_report(verdicts, report);
    size_t accepted = 0;
    for (const CurationVerdict& v : verdicts) accepted += v.accepted ? 1 : 0;
    std::printf("curated %zu clips, accepted %zu -> %s\n", verdicts.size(), accepted,
                report.c_str());
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void cmd_train(int stage, const std::string& config_path, const std::string& resume,
               const std::string& out, const std::string& loss_csv,
               const std::string& sampler_csv, int steps_override) {
    PipelineConfig cfg = config_or_default(config_path);
    if (steps_override > 0) cfg.train.steps = steps_override;

    GvrModel model;
    if (!resume.empty()) {
        model = load_checkpoint(resume);
    } else {
        check(stage != 3, "train: --stage 3 extends an existing checkpoint; pass --resume");
        Rng init_rng(cfg.train.seed);
        model = init_model(cfg.model, init_rng);
    }

    TrainOptions opt = train_options_from(cfg);
    opt.loss_csv = loss_csv;
    opt.checkpoint_out = out;
    TimestepDistribution dist;
    if (!sampler_csv.empty()) {
        dist = read_timestep_csv(sampler_csv);
        opt.timestep_dist = &dist;
    }

    SyntheticSpec spec;
    spec.frames = cfg.train.frames;
    spec.h = cfg.train.size;
    spec.w = cfg.train.size;

    TrainResult result;
    if (stage == 1) {
        auto data = make_stage1_batches(spec, cfg.train.clips, model.config.upsample,
                                        cfg.train.seed);
        result = train(model, data, opt);
    } else if (stage == 2) {
        Stage2Options s2;
        s2.factor = model.config.upsample;
        s2.degrade = cfg.flow_degrade;
        s2.sdedit_alpha = cfg.sdedit.alpha;
        s2.sdedit_steps = cfg.sdedit.steps;
        auto data = make_stage2_batches(spec, cfg.train.clips, s2, cfg.train.seed);
        result = train(model, data, opt);
    } else {
        // Temporal extension: same parameters, new attention/sampling plan from
        // the config file, long clips from the same synthetic source.
        GvrConfig long_cfg = model.config;
        long_cfg.attn_mode = cfg.model.attn_mode;
        long_cfg.window_h = cfg.model.window_h;
        long_cfg.window_w = cfg.model.window_w;
        long_cfg.top_k = cfg.model.top_k;
        long_cfg.temporal_unit = cfg.model.temporal_unit;
        long_cfg.temporal_shifts = cfg.model.temporal_shifts;
        long_cfg.sampler = cfg.model.sampler;
        auto data = make_stage1_batches(spec, cfg.train.clips, model.config.upsample,
                                        cfg.train.seed);
        result = extend_temporal(model, long_cfg, data, opt);
    }

    const double first = result.rows.front().loss;
    const double last = result.rows.back().loss;
    std::printf("stage %d: %d steps, loss %s -> %s", stage, opt.steps, fmt_num(first).c_str(),
                fmt_num(last).c_str());
    if (!out.empty()) std::printf(", checkpoint %s", out.c_str());
    std::printf("\n");
}

// ---------------------------------------------------------------------------
// sampler build
// ---------------------------------------------------------------------------

void cmd_sampler_build(const std::string& model_path, int clips, int steps, double aug,
                       const std::string& out, const std::string& svg,
                       const std::string& config_path, uint64_t seed) {
    PipelineConfig cfg = config_or_default(config_path);
    GvrModel model = load_checkpoint(model_path);
    require_codec_shaped(model, "sampler build");
    if (clips <= 0) clips = cfg.sampler.trace_clips;
    if (steps <= 0) steps = cfg.sampler.trace_steps;

    SyntheticSpec spec;
    spec.frames = cfg.train.frames;
    spec.h = cfg.train.size;
    spec.w = cfg.train.size;
    const int lr = cfg.train.size / model.config.upsample;
    CodecDesc codec;
    check(lr >= codec.fs && lr % codec.fs == 0,
          "sampler build: train size / upsample must be a multiple of " +
              std::to_string(codec.fs));

    std::vector<Latent> lats;
    for (int i = 0; i < clips; ++i) {
        Clip clip = synthetic_clip(spec, seed, 500000 + i);
        Clip small(clamp01(Clip(bicubic_resize_thwc(clip.frames, lr, lr), clip.frame_rate)));
        lats.push_back(encode(small));
    }
    auto traces = collect_traces(model, lats, steps, aug, seed);
    TimestepDistribution dist = build_detail_aware_sampler(traces, cfg.sampler.hf_cut);
    write_timestep_csv(dist, out);
    write_weight_curve_svg(dist, svg.empty() ? out + ".svg" : svg);
    std::printf("sampler: %d traces x %d steps -> %s\n", clips, steps, out.c_str());
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

void cmd_infer(const std::string& model_path, const std::string& in, const std::string& out,
               int steps, double aug, uint64_t seed) {
    GvrModel model = load_checkpoint(model_path);
    require_codec_shaped(model, "infer");
    Clip clip = read_clip(in);
    Latent c0 = encode(clip);
    Rng rng(seed);
    Latent hr = infer(model, c0, steps, aug, rng);
    write_clip(clamp01(decode(hr)), out);
    std::printf("upsampled %s (x%d) -> %s\n", in.c_str(), model.config.upsample, out.c_str());
}

// ---------------------------------------------------------------------------
// bench attn
// ---------------------------------------------------------------------------

std::vector<AttnMode> parse_modes(const std::string& text) {
    std::vector<AttnMode> modes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        AttnMode m;
        check(parse_attn_mode(item, m),
              "bench attn: unknown mode '" + item + "' (full, swin, sparse_local)");
        modes.push_back(m);
    }
    check(!modes.empty(), "bench attn: --modes must name at least one mode");
    return modes;
}

std::vector<std::array<int, 3>> parse_sizes(const std::string& text) {
    std::vector<std::array<int, 3>> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::array<int, 3> s{};
        char x1 = 0, x2 = 0;
        std::stringstream is(item);
        is >> s[0] >> x1 >> s[1] >> x2 >> s[2];
        check(!is.fail() && x1 == 'x' && x2 == 'x' && s[0] >= 1 && s[1] >= 1 && s[2] >= 1,
              "bench attn: size '" + item + "' must look like TxHxW, e.g. 5x16x12");
        sizes.push_back(s);
    }
    check(!sizes.empty(), "bench attn: --sizes must name at least one size");
    return sizes;
}

void cmd_bench_attn(const std::string& modes_text, const std::string& sizes_text,
                    const std::string& out, int d, int heads, int window_h, int window_w,
                    int top_k, int reps, bool measure, uint64_t seed) {
    std::vector<AttnMode> modes = parse_modes(modes_text);
    std::vector<std::array<int, 3>> sizes = parse_sizes(sizes_text);
    BenchConfig bc;
    bc.d = d;
    bc.heads = heads;
    bc.window_h = window_h;
    bc.window_w = window_w;
    bc.top_k = top_k;
    bc.repetitions = reps;
    bc.seed = seed;
    std::vector<BenchRow> rows = bench_attention(modes, sizes, bc);

    CsvTable table;
    table.columns = {"mode",     "tl",       "hg",    "wg",           "d",
                     "heads",    "window_h", "window_w", "top_k",     "analytic_flops",
                     "ratio_vs_full"};
    if (measure) table.columns.push_back("wall_ms");
    for (const BenchRow& row : rows) {
        FlopReport rep = count_flops(row.tl, row.hg, row.wg, row.d, row.heads, row.mode,
                                     row.window_h, row.window_w, row.top_k);
        std::vector<std::string> cells = {attn_mode_name(row.mode),
                                          std::to_string(row.tl),
                                          std::to_string(row.hg),
                                          std::to_string(row.wg),
                                          std::to_string(row.d),
                                          std::to_string(row.heads),
                                          std::to_string(row.window_h),
                                          std::to_string(row.window_w),
                                          std::to_string(row.top_k),
                                          fmt_num(row.analytic_flops),
                                          fmt_num(rep.ratio_vs_full)};
        if (measure) cells.push_back(fmt_num(row.wall_ms));
        table.rows.push_back(std::move(cells));
    }
    emit_report(table, out);
    std::printf("bench: %zu rows -> %s\n", table.rows.size(), out.c_str());
}

// ---------------------------------------------------------------------------
// selftest: every quick structural example, one line per check
// ---------------------------------------------------------------------------

struct SelftestState {
    int failures = 0;

    void run(const char* name, const std::function<void()>& fn) {
        try {
            fn();
            std::printf("ok - %s\n", name);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL - %s: %s\n", name, e.what());
        }
    }
};

void st_check(bool cond, const std::string& what) {
    if (!cond) throw RuntimeError(what);
}

class ZeroVelocity : public VelocityField {
  public:
    Tensor evaluate(const Tensor& z_t, double, const Tensor&) const override {
        return Tensor(z_t.shape);
    }
};

bool bytes_equal(const Tensor& a, const Tensor& b) {
    return same_shape(a.shape, b.shape) &&
           std::memcmp(a.ptr(), b.ptr(), sizeof(float) * a.data.size()) == 0;
}

int cmd_selftest() {
    SelftestState st;
    fs::path dir = fs::temp_directory_path() / "gvrlab_selftest";
    fs::remove_all(dir);
    fs::create_directories(dir);

    st.run("tape: mean gradient is uniform", [] {
        GradTape tape;
        Rng rng(1);
        auto x = tape.param(randn(rng, Shape{3, 4}));
        auto loss = tape.mean_all(x);
        tape.backward(loss);
        Tensor g = tape.grad(x);
        for (float v : g.data) st_check(std::abs(v - 1.0f / 12.0f) <= 1e-7f, "bad grad");
    });
    st.run("tape: mse gradient matches the closed form", [] {
        GradTape tape;
        auto x = tape.param(Tensor(Shape{3}, std::vector<float>{1, 2, 3}));
        auto loss = tape.mse_to(x, Tensor(Shape{3}));
        tape.backward(loss);
        Tensor g = tape.grad(x);
        const float want[] = {2.0f / 3, 4.0f / 3, 6.0f / 3};
        for (int i = 0; i < 3; ++i) st_check(std::abs(g.data[i] - want[i]) <= 1e-6f, "bad grad");
    });
    st.run("latent: frame arithmetic 17 -> 5 and 77 -> 20", [] {
        st_check(latent_frames_for(17, 4) == 5, "17 frames");
        st_check(latent_frames_for(77, 4) == 20, "77 frames");
    });
    st.run("latent: encode/decode round trip is lossless", [] {
        SyntheticSpec spec;
        spec.frames = 5;
        spec.h = 16;
        spec.w = 16;
        Clip clip = synthetic_clip(spec, 3, 0);
        Clip back = decode(encode(clip));
        st_check(bytes_equal(clip.frames, back.frames), "codec round trip");
    });
    st.run("media: y4m write/read round trip at 8-bit values", [&] {
        Clip clip = make_clip(2, 4, 6);
        for (size_t i = 0; i < clip.frames.data.size(); ++i)
            clip.frames.data[i] = static_cast<float>(i % 256) / 255.0f;
        const std::string p = (dir / "roundtrip.y4m").string();
        write_clip(clip, p);
        Clip back = read_clip(p);
        st_check(bytes_equal(clip.frames, back.frames), "y4m round trip");
    });
    st.run("media: csv report round trip", [&] {
        CsvTable t;
        t.columns = {"a", "b"};
        t.rows = {{"1", "x,y"}, {"2", "line\nbreak"}};
        const std::string p = (dir / "t.csv").string();
        emit_report(t, p);
        CsvTable back = read_report(p);
        st_check(back.columns == t.columns && back.rows == t.rows, "csv round trip");
    });
    st.run("degrade: blur kernel weights sum to one", [] {
        BlurKernelSpec k = make_blur_kernel(4.0f, 0.3f);
        double s = 0.0;
        for (float w : k.weights) s += w;
        st_check(std::abs(s - 1.0) <= 1e-6, "kernel norm");
        st_check(k.length % 2 == 1, "odd taps");
    });
    st.run("degrade: static frame passes motion blur untouched", [] {
        Rng rng(4);
        Tensor frame = randn(rng, Shape{16, 16, 3});
        Tensor flow(Shape{16, 16, 2});
        Tensor out = motion_blur(frame, flow, 8, 1.5f);
        st_check(bytes_equal(frame, out), "static copy");
    });
    st.run("degrade: empty mask yields no ellipses", [] {
        Rng rng(5);
        Tensor mask(Shape{8, 8});
        Tensor flow(Shape{8, 8, 2});
        st_check(sample_ellipses(mask, flow, rng, 0.5f).empty(), "no ellipses");
    });
    st.run("flow-match: add_noise endpoints are bitwise exact", [] {
        Rng rng(6);
        Tensor z0 = randn(rng, Shape{1, 2, 4, 4});
        Tensor eps = randn(rng, z0.shape);
        st_check(bytes_equal(add_noise(z0, 0.0, eps).z_t, z0), "t=0");
        st_check(bytes_equal(add_noise(z0, 1.0, eps).z_t, eps), "t=1");
    });
    st.run("flow-match: oracle recovers z0 at 1 and 50 steps", [] {
        Rng rng(7);
        Tensor z0 = randn(rng, Shape{1, 2, 4, 4});
        Tensor eps = randn(rng, z0.shape);
        OracleLinearVelocity field(z0, eps);
        for (int steps : {1, 50}) {
            Rng r(8);
            Tensor out = ode_sample(field, eps, steps, Tensor{}, r);
            st_check(max_abs_diff(out, z0) <= 1e-5, "recovery");
        }
    });
    st.run("flow-match: exact velocity target gives zero loss", [] {
        Rng rng(9);
        Tensor z0 = randn(rng, Shape{1, 2, 4, 4});
        Tensor eps = randn(rng, z0.shape);
        OracleLinearVelocity field(z0, eps);
        st_check(cfm_loss(field, z0, eps, 0.3, Tensor{}) <= 1e-10, "cfm loss");
    });
    st.run("flow-match: zero velocity returns the noise unchanged", [] {
        Rng rng(10);
        Tensor eps = randn(rng, Shape{1, 2, 4, 4});
        ZeroVelocity field;
        Rng r(11);
        st_check(bytes_equal(ode_sample(field, eps, 5, Tensor{}, r), eps), "identity");
    });
    st.run("sdedit: alpha 0 is the identity", [] {
        Rng rng(12);
        Latent c;
        c.data = randn(rng, Shape{1, c.codec.cl(), 2, 2});
        ContractiveToyVelocity toy;
        Rng r(13);
        Latent out = sdedit_degrade(toy, c, 0.0, 5, r);
        st_check(bytes_equal(out.data, c.data), "identity");
    });
    st.run("sampler: uniform deciles within one percent", [] {
        Rng rng(14);
        std::array<int, 10> bins{};
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            double t = sample_timestep_uniform(rng);
            int b = std::min(9, static_cast<int>(t * 10.0));
            ++bins[static_cast<size_t>(b)];
        }
        for (int b : bins) {
            double f = static_cast<double>(b) / n;
            st_check(f >= 0.09 && f <= 0.11, "decile out of band");
        }
    });
    st.run("sampler: point mass stays in its bin", [] {
        TimestepDistribution dist;
        dist.edges = {0.4, 0.42};
        dist.probs = {1.0};
        Rng rng(15);
        for (int i = 0; i < 100; ++i) {
            double t = sample_timestep(dist, rng);
            st_check(t >= 0.4 && t < 0.42, "outside bin");
        }
    });
    st.run("sampler: detail-aware distribution sums to one", [] {
        InferenceTrace tr;
        Rng rng(16);
        for (int i = 0; i < 4; ++i) tr.pred_clean.push_back(randn(rng, Shape{1, 1, 8, 8}));
        TimestepDistribution dist = build_detail_aware_sampler({tr}, 0.5);
        double s = 0.0;
        for (double p : dist.probs) s += p;
        st_check(std::abs(s - 1.0) <= 1e-6, "not normalized");
    });
    st.run("augmentation: [0,0] is identity, [0.3,0.6] maps to steps 300..600", [] {
        Rng rng(17);
        Latent c;
        c.data = randn(rng, Shape{1, c.codec.cl(), 2, 2});
        Rng r0(18);
        auto [same, aug0] = apply_noise_augmentation(c, 0.0, 0.0, r0);
        st_check(bytes_equal(same.data, c.data) && aug0.level == 0.0, "identity");
        Rng r1(19);
        for (int i = 0; i < 1000; ++i) {
            auto [out, aug] = apply_noise_augmentation(c, 0.3, 0.6, r1);
            st_check(aug.timestep() >= 300 && aug.timestep() <= 600, "timestep range");
        }
    });
    st.run("attention: swin equals full when the window covers the frame", [] {
        Rng rng(20);
        TokenGrid g(1, 4, 4, randn(rng, Shape{16, 8}));
        WindowPartition part = make_windows(4, 4, 4, 4);
        Tensor a = full_attention(g, g, g, 2);
        Tensor b = swin_attention(g, g, g, 2, part, false);
        st_check(max_abs_diff(a, b) <= 1e-5, "swin vs full");
    });
    st.run("attention: sparse with top_k 0 equals unshifted swin", [] {
        Rng rng(21);
        TokenGrid g(1, 4, 4, randn(rng, Shape{16, 8}));
        WindowPartition part = make_windows(4, 4, 2, 2);
        Tensor a = swin_attention(g, g, g, 2, part, false);
        Tensor b = sparse_local_attention(g, g, g, 2, part, 0);
        st_check(max_abs_diff(a, b) <= 1e-5, "sparse vs swin");
    });
    st.run("attention: temporal roll round trip is bitwise", [] {
        Rng rng(22);
        TokenGrid g(6, 2, 2, randn(rng, Shape{24, 4}));
        TokenGrid back = roll_frames(roll_frames(g, 2), -2);
        st_check(bytes_equal(back.tokens, g.tokens), "roll round trip");
    });
    st.run("attention: 20 latent frames make 4 units of 5", [] {
        auto units = temporal_units(20, 5, 0);
        st_check(units.size() == 4, "unit count");
        for (const auto& u : units) st_check(u.size() == 5, "unit size");
    });
    st.run("attention: 1080p-analogue sparse/full flop ratio under a quarter", [] {
        FlopReport r = count_flops(5, 135, 240, 64, 8, AttnMode::kSparseLocal, 9, 12, 1);
        st_check(r.ratio_vs_full > 0.0 && r.ratio_vs_full <= 0.25, "ratio");
    });
    st.run("bench: rows cover every mode and size", [] {
        std::vector<AttnMode> modes{AttnMode::kFull, AttnMode::kSwin, AttnMode::kSparseLocal};
        std::vector<std::array<int, 3>> sizes{{2, 4, 4}, {2, 8, 8}, {4, 4, 4}};
        BenchConfig bc;
        bc.repetitions = 1;
        auto rows = bench_attention(modes, sizes, bc);
        st_check(rows.size() == modes.size() * sizes.size(), "row count");
    });
    st.run("model: fresh model predicts exactly zero velocity", [] {
        GvrConfig cfg;
        cfg.latent_channels = 4;
        cfg.width = 8;
        cfg.heads = 2;
        cfg.depth = 2;
        cfg.text_dim = 4;
        cfg.cond_kernel_t = 1;
        Rng rng(23);
        GvrModel model = init_model(cfg, rng);
        Tensor z = randn(rng, Shape{1, 4, 4, 4});
        Tensor c = randn(rng, Shape{1, 4, 2, 2});
        Tensor v = model.forward(z, 0.5, c, 0.4);
        st_check(same_shape(v.shape, z.shape), "shape");
        st_check(max_abs(v) == 0.0, "zero init");
    });
    st.run("model: two 2-step training runs agree bitwise", [] {
        GvrConfig cfg;
        cfg.latent_channels = 4;
        cfg.width = 8;
        cfg.heads = 2;
        cfg.depth = 2;
        cfg.text_dim = 4;
        cfg.cond_kernel_t = 1;
        std::vector<TrainBatch> data(1);
        Rng drng(24);
        data[0].z0.data = randn(drng, Shape{1, 4, 4, 4});
        data[0].c0.data = randn(drng, Shape{1, 4, 2, 2});
        TrainOptions opt;
        opt.steps = 2;
        opt.lr = 1e-3;
        Rng r1(25), r2(25);
        GvrModel m1 = init_model(cfg, r1), m2 = init_model(cfg, r2);
        TrainResult a = train(m1, data, opt), b = train(m2, data, opt);
        for (size_t i = 0; i < a.rows.size(); ++i)
            st_check(a.rows[i].loss == b.rows[i].loss, "loss trace");
        for (size_t i = 0; i < m1.params.size(); ++i)
            st_check(bytes_equal(m1.params[i].value, m2.params[i].value), "params");
    });
    st.run("model: same-seed inference is bit identical", [] {
        GvrConfig cfg;
        cfg.latent_channels = 4;
        cfg.width = 8;
        cfg.heads = 2;
        cfg.depth = 2;
        cfg.text_dim = 4;
        cfg.cond_kernel_t = 1;
        Rng rng(26);
        GvrModel model = init_model(cfg, rng);
        Latent c0;
        c0.data = randn(rng, Shape{1, 4, 2, 2});
        Rng ra(27), rb(27);
        st_check(bytes_equal(infer(model, c0, 3, 0.45, ra).data,
                             infer(model, c0, 3, 0.45, rb).data),
                 "determinism");
    });
    st.run("model: trace length equals the step count", [] {
        Rng rng(28);
        Tensor z0 = randn(rng, Shape{1, 2, 4, 4});
        Tensor eps = randn(rng, z0.shape);
        OracleLinearVelocity field(z0, eps);
        InferenceTrace tr;
        Rng r(29);
        ode_sample(field, eps, 7, Tensor{}, r, &tr);
        st_check(tr.pred_clean.size() == 7, "trace length");
    });
    st.run("model: parameter count is stable for a fixed config", [] {
        GvrConfig cfg;
        cfg.latent_channels = 4;
        cfg.width = 8;
        cfg.heads = 2;
        cfg.depth = 2;
        cfg.text_dim = 4;
        Rng r1(30), r2(31);
        st_check(init_model(cfg, r1).param_count() == init_model(cfg, r2).param_count(),
                 "count");
    });
    st.run("model: checkpoint round trip preserves parameters", [&] {
        GvrConfig cfg;
        cfg.latent_channels = 4;
        cfg.width = 8;
        cfg.heads = 2;
        cfg.depth = 2;
        cfg.text_dim = 4;
        Rng rng(32);
        GvrModel model = init_model(cfg, rng);
        const std::string p = (dir / "self.gvrm").string();
        save_checkpoint(model, p);
        GvrModel back = load_checkpoint(p);
        st_check(back.config.canonical() == model.config.canonical(), "config");
        for (size_t i = 0; i < model.params.size(); ++i)
            st_check(bytes_equal(back.params[i].value, model.params[i].value), "params");
    });
    st.run("curation: black clip is rejected for brightness", [] {
        Clip black = make_clip(12, 16, 16);
        CurationVerdict v = curate_clip(black, "black");
        st_check(!v.accepted, "accepted");
        st_check(v.reject_reason.find("brightness") != std::string::npos, "reason");
    });
    st.run("curation: flat gray clip is rejected for zero detail", [] {
        Clip gray = make_clip(12, 16, 16);
        for (float& v : gray.frames.data) v = 0.5f;
        CurationVerdict v = curate_clip(gray, "gray");
        st_check(!v.accepted, "accepted");
        st_check(v.reject_reason.find("laplacian") != std::string::npos, "reason");
    });
    st.run("curation: checkerboard clip is accepted", [] {
        Clip board = make_clip(12, 16, 16);
        for (int t = 0; t < board.t(); ++t)
            for (int y = 0; y < board.h(); ++y)
                for (int x = 0; x < board.w(); ++x) {
                    float v = ((x / 2 + y / 2) % 2 == 0) ? 0.15f : 0.85f;
                    for (int c = 0; c < 3; ++c) board.px(t, y, x, c) = v;
                }
        CurationVerdict v = curate_clip(board, "board");
        st_check(v.accepted, v.reject_reason);
    });
    st.run("dataset: psnr of a clip with itself is infinite", [] {
        SyntheticSpec spec;
        spec.frames = 5;
        spec.h = 16;
        spec.w = 16;
        Clip clip = synthetic_clip(spec, 33, 0);
        st_check(std::isinf(psnr(clip.frames, clip.frames)), "psnr");
    });
    st.run("config: serialize/parse is a byte fixed point", [] {
        PipelineConfig cfg;
        std::string once = serialize_pipeline_config(cfg);
        std::string twice = serialize_pipeline_config(parse_pipeline_config(once));
        st_check(once == twice, "fixed point");
    });

    fs::remove_all(dir);
    if (st.failures > 0) {
        std::printf("selftest: %d checks failed\n", st.failures);
        return 1;
    }
    std::printf("selftest: all checks passed\n");
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// run_cli
// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
    CLI::App app{"gvr: desk-scale latent video super-resolution laboratory", "gvr"};
    app.require_subcommand(1);

    int workers = 0;
    app.add_option("--workers", workers, "worker threads (0 = hardware default)");

    // degrade
    CLI::App* degrade = app.add_subcommand("degrade", "synthesize degraded clips");
    degrade->require_subcommand(1);

    std::string df_in, df_out, df_config;
    uint64_t df_seed = 1;
    CLI::App* dflow = degrade->add_subcommand("flow", "flow-driven blur + colour blending");
    dflow->add_option("in", df_in, "input clip directory")->required();
    dflow->add_option("out", df_out, "output clip directory")->required();
    dflow->add_option("--config", df_config, "pipeline config JSON");
    dflow->add_option("--seed", df_seed, "degradation seed");

    std::string ds_in, ds_out, ds_model;
    double ds_alpha = 0.4, ds_aug = 0.45;
    int ds_steps = 5;
    uint64_t ds_seed = 1;
    CLI::App* dsde = degrade->add_subcommand("sdedit", "noise-and-denoise degradation");
    dsde->add_option("in", ds_in, "input clip directory")->required();
    dsde->add_option("out", ds_out, "output clip directory")->required();
    dsde->add_option("--alpha", ds_alpha, "corruption ratio in [0,1]");
    dsde->add_option("--steps", ds_steps, "denoising steps");
    dsde->add_option("--model", ds_model, "x1-upsample checkpoint prior (default: toy field)");
    dsde->add_option("--aug", ds_aug, "conditioning augmentation level for --model");
    dsde->add_option("--seed", ds_seed, "noise seed");

    // curate
    std::string cu_dir, cu_report = "curation.csv", cu_config;
    CLI::App* curate = app.add_subcommand("curate", "screen a clip directory");
    curate->add_option("dir", cu_dir, "clip directory")->required();
    curate->add_option("--report", cu_report, "verdict CSV path");
    curate->add_option("--config", cu_config, "pipeline config JSON");

    // train
    int tr_stage = 1, tr_steps = 0;
    std::string tr_config, tr_resume, tr_out = "model.gvrm", tr_loss_csv, tr_sampler_csv;
    CLI::App* train_cmd = app.add_subcommand("train", "three-stage training recipe");
    train_cmd->add_option("--stage", tr_stage, "1: one-order pairs, 2: degraded pairs, 3: temporal extension")
        ->check(CLI::Range(1, 3));
    train_cmd->add_option("--config", tr_config, "pipeline config JSON");
    train_cmd->add_option("--resume", tr_resume, "checkpoint to continue from");
    train_cmd->add_option("--out", tr_out, "checkpoint output path");
    train_cmd->add_option("--loss-csv", tr_loss_csv, "loss trace CSV path");
    train_cmd->add_option("--sampler-csv", tr_sampler_csv,
                          "timestep distribution CSV (required for detail_aware)");
    train_cmd->add_option("--steps", tr_steps, "override the configured step count");

    // sampler build
    std::string sb_model, sb_out = "sampler.csv", sb_svg, sb_config;
    int sb_clips = 0, sb_steps = 0;
    double sb_aug = 0.45;
    uint64_t sb_seed = 1;
    CLI::App* sampler_cmd = app.add_subcommand("sampler", "timestep sampler tools");
    sampler_cmd->require_subcommand(1);
    CLI::App* sbuild = sampler_cmd->add_subcommand("build", "build the detail-aware distribution");
    sbuild->add_option("--model", sb_model, "trained checkpoint")->required();
    sbuild->add_option("--clips", sb_clips, "trace clips (0 = config value)");
    sbuild->add_option("--steps", sb_steps, "denoising steps per trace (0 = config value)");
    sbuild->add_option("--aug", sb_aug, "fixed augmentation level");
    sbuild->add_option("--out", sb_out, "distribution CSV path");
    sbuild->add_option("--svg", sb_svg, "weight-curve SVG path (default: <out>.svg)");
    sbuild->add_option("--config", sb_config, "pipeline config JSON");
    sbuild->add_option("--seed", sb_seed, "trace seed");

    // infer
    std::string in_model, in_in, in_out;
    int in_steps = 50;
    double in_aug = 0.45;
    uint64_t in_seed = 1;
    CLI::App* infer_cmd = app.add_subcommand("infer", "upsample a clip with a checkpoint");
    infer_cmd->add_option("--model", in_model, "trained checkpoint")->required();
    infer_cmd->add_option("--in", in_in, "input clip (y4m or frame directory)")->required();
    infer_cmd->add_option("--out", in_out, "output clip path")->required();
    infer_cmd->add_option("--steps", in_steps, "denoising steps");
    infer_cmd->add_option("--aug", in_aug, "fixed conditioning augmentation level");
    infer_cmd->add_option("--seed", in_seed, "noise seed");

    // bench attn
    std::string ba_modes = "full,swin,sparse_local";
    std::string ba_sizes = "5x8x8,5x16x12,5x32x24";
    std::string ba_out = "bench.csv";
    int ba_d = 64, ba_heads = 4, ba_wh = 4, ba_ww = 3, ba_topk = 1, ba_reps = 3;
    bool ba_measure = false;
    uint64_t ba_seed = 7;
    CLI::App* bench = app.add_subcommand("bench", "cost reports");
    bench->require_subcommand(1);
    CLI::App* battn = bench->add_subcommand("attn", "attention-mode cost table");
    battn->add_option("--modes", ba_modes, "comma-separated attention modes");
    battn->add_option("--sizes", ba_sizes, "comma-separated TxHxW token grids");
    battn->add_option("--out", ba_out, "report CSV path");
    battn->add_option("--d", ba_d, "model width");
    battn->add_option("--heads", ba_heads, "attention heads");
    battn->add_option("--window-h", ba_wh, "window rows");
    battn->add_option("--window-w", ba_ww, "window columns");
    battn->add_option("--top-k", ba_topk, "extra windows for sparse mode");
    battn->add_option("--reps", ba_reps, "timing repetitions");
    battn->add_flag("--measure", ba_measure, "include wall-clock timings (non-deterministic)");
    battn->add_option("--seed", ba_seed, "bench input seed");

    // selftest
    CLI::App* self = app.add_subcommand("selftest", "run the quick structural checks");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        set_workers(workers);
        if (*dflow) {
            cmd_degrade_flow(df_in, df_out, df_config, df_seed);
        } else if (*dsde) {
            cmd_degrade_sdedit(ds_in, ds_out, ds_alpha, ds_steps, ds_model, ds_aug, ds_seed);
        } else if (*curate) {
            cmd_curate(cu_dir, cu_report, cu_config);
        } else if (*train_cmd) {
            cmd_train(tr_stage, tr_config, tr_resume, tr_out, tr_loss_csv, tr_sampler_csv,
                      tr_steps);
        } else if (*sbuild) {
            cmd_sampler_build(sb_model, sb_clips, sb_steps, sb_aug, sb_out, sb_svg, sb_config,
                              sb_seed);
        } else if (*infer_cmd) {
            cmd_infer(in_model, in_in, in_out, in_steps, in_aug, in_seed);
        } else if (*battn) {
            cmd_bench_attn(ba_modes, ba_sizes, ba_out, ba_d, ba_heads, ba_wh, ba_ww, ba_topk,
                           ba_reps, ba_measure, ba_seed);
        } else if (*self) {
            return cmd_selftest();
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const RuntimeError& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace gvr
