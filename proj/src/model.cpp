// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0

#include "gvr/model.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gvr/media_io.hpp"
#include "gvr/tape.hpp"

namespace gvr {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

const char* sampler_kind_name(SamplerKind s) {
    return s == SamplerKind::kUniform ? "uniform" : "detail-aware";
}

bool parse_sampler_kind(const std::string& name, SamplerKind& out) {
    if (name == "uniform") {
        out = SamplerKind::kUniform;
        return true;
    }
    if (name == "detail-aware") {
        out = SamplerKind::kDetailAware;
        return true;
    }
    return false;
}

void GvrConfig::validate() const {
    check(latent_channels >= 1, "GvrConfig: latent_channels must be positive");
    check(width >= 1 && heads >= 1, "GvrConfig: width and heads must be positive");
    check(width % heads == 0, "GvrConfig: width " + std::to_string(width) +
                                  " not divisible by heads " + std::to_string(heads));
    check(depth >= 2 && depth % 2 == 0,
          "GvrConfig: depth must be a positive even number (the temporal shift pattern pairs "
          "layers), got " +
              std::to_string(depth));
    check(window_h >= 1 && window_w >= 1, "GvrConfig: window extents must be positive");
    check(top_k >= 0, "GvrConfig: top_k must be >= 0");
    check(temporal_unit >= 1, "GvrConfig: temporal_unit must be positive");
    check(0.0 <= aug_lo && aug_lo <= aug_hi && aug_hi <= 1.0,
          "GvrConfig: noise-augmentation interval must satisfy 0 <= lo <= hi <= 1");
    check(upsample >= 1, "GvrConfig: upsample factor must be >= 1");
    check(text_dim >= 1, "GvrConfig: text_dim must be positive");
    check(cond_kernel_t >= 1 && cond_kernel_t % 2 == 1,
          "GvrConfig: cond_kernel_t must be odd (same padding), got " +
              std::to_string(cond_kernel_t));
    check(ff_mult >= 1, "GvrConfig: ff_mult must be positive");
}

std::string GvrConfig::canonical() const {
    std::string s;
    s += "channels=" + std::to_string(latent_channels);
    s += ";width=" + std::to_string(width);
    s += ";heads=" + std::to_string(heads);
    s += ";depth=" + std::to_string(depth);
    s += ";attn=" + std::string(attn_mode_name(attn_mode));
    s += ";wh=" + std::to_string(window_h);
    s += ";ww=" + std::to_string(window_w);
    s += ";top_k=" + std::to_string(top_k);
    s += ";unit=" + std::to_string(temporal_unit);
    s += ";shifts=" + std::string(temporal_shifts ? "1" : "0");
    s += ";aug_lo=" + fmt_num(aug_lo);
    s += ";aug_hi=" + fmt_num(aug_hi);
    s += ";sampler=" + std::string(sampler_kind_name(sampler));
    s += ";upsample=" + std::to_string(upsample);
    s += ";text_dim=" + std::to_string(text_dim);
    s += ";cond_kt=" + std::to_string(cond_kernel_t);
    s += ";ff_mult=" + std::to_string(ff_mult);
    return s;
}

uint64_t GvrConfig::digest() const {
    std::string s = canonical();
    return fnv1a(s.data(), s.size());
}

GvrConfig parse_canonical_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t semi = text.find(';', pos);
        if (semi == std::string::npos) semi = text.size();
        std::string item = text.substr(pos, semi - pos);
        size_t eq = item.find('=');
        check(eq != std::string::npos, "config: malformed entry '" + item + "'");
        std::string key = item.substr(0, eq);
        check(!kv.count(key), "config: duplicate key '" + key + "'");
        kv[key] = item.substr(eq + 1);
        pos = semi + 1;
    }
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        check(it != kv.end(), "config: missing key '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_int = [&](const std::string& key) {
        std::string v = take(key);
        try {
            size_t used = 0;
            int n = std::stoi(v, &used);
            check(used == v.size(), "config: bad integer for '" + key + "': " + v);
            return n;
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("config: bad integer for '" + key + "': " + v);
        }
    };
    auto take_num = [&](const std::string& key) {
        std::string v = take(key);
        char* end = nullptr;
        double d = std::strtod(v.c_str(), &end);
        check(end == v.c_str() + v.size() && v.size() > 0,
              "config: bad number for '" + key + "': " + v);
        return d;
    };

    GvrConfig cfg;
    cfg.latent_channels = take_int("channels");
    cfg.width = take_int("width");
    cfg.heads = take_int("heads");
    cfg.depth = take_int("depth");
    std::string attn = take("attn");
    check(parse_attn_mode(attn, cfg.attn_mode), "config: unknown attention mode '" + attn + "'");
    cfg.window_h = take_int("wh");
    cfg.window_w = take_int("ww");
    cfg.top_k = take_int("top_k");
    cfg.temporal_unit = take_int("unit");
    cfg.temporal_shifts = take_int("shifts") != 0;
    cfg.aug_lo = take_num("aug_lo");
    cfg.aug_hi = take_num("aug_hi");
    std::string sampler = take("sampler");
    check(parse_sampler_kind(sampler, cfg.sampler), "config: unknown sampler '" + sampler + "'");
    cfg.upsample = take_int("upsample");
    cfg.text_dim = take_int("text_dim");
    cfg.cond_kernel_t = take_int("cond_kt");
    cfg.ff_mult = take_int("ff_mult");
    check(kv.empty(), "config: unknown key '" + (kv.empty() ? "" : kv.begin()->first) + "'");
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameter schema
// ---------------------------------------------------------------------------

namespace {

enum class InitKind { kScaled, kZero, kOne };

struct ParamSpec {
    std::string name;
    Shape shape;
    InitKind init = InitKind::kZero;
    int fan_in = 0;
};

// The full named parameter list for a config, in creation order. Everything
// downstream (init, checkpoints, the temporal-extension shape check) derives
// from this one function so the layouts cannot drift apart.
std::vector<ParamSpec> param_schema(const GvrConfig& cfg) {
    std::vector<ParamSpec> out;
    auto add = [&](std::string name, Shape shape, InitKind init, int fan_in = 0) {
        out.push_back(ParamSpec{std::move(name), std::move(shape), init, fan_in});
    };
    const int cl = cfg.latent_channels;
    const int d = cfg.width;
    const int kt = cfg.cond_kernel_t;
    const int fh = cfg.ff_mult * d;

    add("cond_in.w", {d, cl, kt, 3, 3}, InitKind::kScaled, cl * kt * 9);
    add("cond_in.b", {d}, InitKind::kZero);
    add("cond_out.w", {d, d, kt, 3, 3}, InitKind::kScaled, d * kt * 9);
    add("cond_out.b", {d}, InitKind::kZero);
    add("in_proj.w", {d, cl + d}, InitKind::kScaled, cl + d);
    add("in_proj.b", {d}, InitKind::kZero);
    add("text.w", {d, cfg.text_dim}, InitKind::kScaled, cfg.text_dim);
    add("text.b", {d}, InitKind::kZero);
    for (int b = 0; b < cfg.depth; ++b) {
        const std::string p = "blk" + std::to_string(b) + ".";
        add(p + "ln1.g", {d}, InitKind::kOne);
        add(p + "ln1.b", {d}, InitKind::kZero);
        add(p + "attn.wq", {d, d}, InitKind::kScaled, d);
        add(p + "attn.bq", {d}, InitKind::kZero);
        // No key bias: softmax scores are invariant to a shared shift of the
        // keys, so such a parameter could never receive gradient.
        add(p + "attn.wk", {d, d}, InitKind::kScaled, d);
        add(p + "attn.wv", {d, d}, InitKind::kScaled, d);
        add(p + "attn.bv", {d}, InitKind::kZero);
        add(p + "attn.wo", {d, d}, InitKind::kScaled, d);
        add(p + "attn.bo", {d}, InitKind::kZero);
        add(p + "ln2.g", {d}, InitKind::kOne);
        add(p + "ln2.b", {d}, InitKind::kZero);
        add(p + "ff.w1", {fh, d}, InitKind::kScaled, d);
        add(p + "ff.b1", {fh}, InitKind::kZero);
        add(p + "ff.w2", {d, fh}, InitKind::kScaled, fh);
        add(p + "ff.b2", {d}, InitKind::kZero);
        // Modulation starts at zero: every block begins as a plain pre-norm
        // block and learns its conditioning strength.
        add(p + "mod.w", {4 * d, d}, InitKind::kZero);
        add(p + "mod.b", {4 * d}, InitKind::kZero);
    }
    add("final_ln.g", {d}, InitKind::kOne);
    add("final_ln.b", {d}, InitKind::kZero);
    // Zero output projection: an untrained model predicts exactly v = 0.
    add("out.w", {cl, d}, InitKind::kZero);
    add("out.b", {cl}, InitKind::kZero);
    // Gated full-rank skips from the noisy latent and the upsampled
    // conditioning straight to the velocity output. The trunk is a width-D
    // bottleneck with D << Cl, so the output projection alone spans only a
    // D-dimensional subspace per token; the dominant velocity term (the
    // injected noise) spans all Cl channels and would be unreachable. The
    // per-channel gains are driven by the timestep/augmentation embedding and
    // start at zero, preserving v == 0 at init.
    add("skip.w", {2 * cl, d}, InitKind::kZero);
    add("skip.b", {2 * cl}, InitKind::kZero);
    return out;
}

void verify_params(const GvrModel& model, const std::string& what) {
    auto schema = param_schema(model.config);
    check(model.params.size() == schema.size(),
          what + ": model has " + std::to_string(model.params.size()) +
              " parameter blocks, config requires " + std::to_string(schema.size()));
    for (size_t i = 0; i < schema.size(); ++i) {
        check(model.params[i].name == schema[i].name,
              what + ": parameter " + std::to_string(i) + " is '" + model.params[i].name +
                  "', expected '" + schema[i].name + "'");
        check(same_shape(model.params[i].value.shape, schema[i].shape),
              what + ": parameter '" + schema[i].name + "' has shape " +
                  shape_str(model.params[i].value.shape) + ", expected " +
                  shape_str(schema[i].shape));
    }
}

}  // namespace

GvrModel init_model(const GvrConfig& cfg, Rng& rng) {
    cfg.validate();
    GvrModel model;
    model.config = cfg;
    for (const ParamSpec& spec : param_schema(cfg)) {
        Tensor value;
        switch (spec.init) {
            case InitKind::kScaled:
                value = scale(randn(rng, spec.shape),
                              1.0f / std::sqrt(static_cast<float>(spec.fan_in)));
                break;
            case InitKind::kZero:
                value = Tensor::zeros(spec.shape);
                break;
            case InitKind::kOne:
                value = Tensor::full(spec.shape, 1.0f);
                break;
        }
        model.params.push_back(ParamBlock{spec.name, std::move(value)});
    }
    return model;
}

int64_t GvrModel::param_count() const {
    int64_t n = 0;
    for (const ParamBlock& p : params) n += p.value.numel();
    return n;
}

const Tensor& GvrModel::param(const std::string& name) const {
    for (const ParamBlock& p : params)
        if (p.name == name) return p.value;
    throw RuntimeError("GvrModel: no parameter named '" + name + "'");
}

Tensor& GvrModel::param(const std::string& name) {
    for (ParamBlock& p : params)
        if (p.name == name) return p.value;
    throw RuntimeError("GvrModel: no parameter named '" + name + "'");
}

Tensor sinusoidal_embedding(int index, int dim) {
    check(dim >= 1, "sinusoidal_embedding: dim must be positive");
    Tensor out(Shape{1, dim});
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        double ang = static_cast<double>(index) * freq;
        out[i] = static_cast<float>(std::cos(ang));
        out[half + i] = static_cast<float>(std::sin(ang));
    }
    return out;  // odd dim leaves the last channel at zero
}

// ---------------------------------------------------------------------------
// Forward graph
// ---------------------------------------------------------------------------

namespace {

struct ParamIds {
    const GvrModel* model = nullptr;
    std::vector<GradTape::NodeId> ids;

    GradTape::NodeId operator()(const std::string& name) const {
        for (size_t i = 0; i < model->params.size(); ++i)
            if (model->params[i].name == name) return ids[i];
        throw RuntimeError("GvrModel: no parameter named '" + name + "'");
    }
};

ParamIds register_params(GradTape& tape, const GvrModel& model, bool requires_grad) {
    ParamIds p;
    p.model = &model;
    p.ids.reserve(model.params.size());
    for (const ParamBlock& blk : model.params)
        p.ids.push_back(tape.leaf(blk.value, requires_grad));
    return p;
}

// Records the whole velocity prediction on the tape and returns the output
// node, shaped like z_t. Token layout: one token per latent (frame, y, x)
// position, flattened frame-major.
GradTape::NodeId build_forward(GradTape& tape, const GvrConfig& cfg, const ParamIds& P,
                               const Tensor& z_t, double t, const Tensor& c_aug,
                               double aug_level, const Tensor& text_slot) {
    check(z_t.ndim() == 4 && c_aug.ndim() == 4,
          "forward: latents must be rank-4 (Tl, Cl, H, W)");
    const int tl = z_t.dim(0), cl = z_t.dim(1), hh = z_t.dim(2), ww = z_t.dim(3);
    check(cl == cfg.latent_channels, "forward: z_t has " + std::to_string(cl) +
                                         " channels, config expects " +
                                         std::to_string(cfg.latent_channels));
    check(c_aug.dim(0) == tl && c_aug.dim(1) == cl,
          "forward: conditioning latent frame/channel extents do not match z_t");
    check(c_aug.dim(2) * cfg.upsample == hh && c_aug.dim(3) * cfg.upsample == ww,
          "forward: conditioning extents " + std::to_string(c_aug.dim(2)) + "x" +
              std::to_string(c_aug.dim(3)) + " x upsample " + std::to_string(cfg.upsample) +
              " do not match target " + std::to_string(hh) + "x" + std::to_string(ww));
    check(t >= 0.0 && t <= 1.0, "forward: t must be in [0, 1]");
    check(aug_level >= 0.0 && aug_level <= 1.0, "forward: aug level must be in [0, 1]");
    check(text_slot.numel() == 0 || text_slot.numel() == cfg.text_dim,
          "forward: text slot must be empty (null) or have " + std::to_string(cfg.text_dim) +
              " entries");
    const int d = cfg.width;
    const int n_tok = tl * hh * ww;

    // Conditioning path: 3D conv at LR extents, bilinear upsample, 3D conv.
    auto c_leaf = tape.leaf(c_aug);
    auto c_cf = tape.permute4(c_leaf, {1, 0, 2, 3});  // (Cl, Tl, h, w)
    auto cf1 = tape.silu(tape.conv3d_same(c_cf, P("cond_in.w"), P("cond_in.b")));
    auto cf2 = tape.bilinear_last2(cf1, hh, ww);
    auto cf3 = tape.silu(tape.conv3d_same(cf2, P("cond_out.w"), P("cond_out.b")));
    auto cond_tok = tape.reshape(tape.permute4(cf3, {1, 2, 3, 0}), Shape{n_tok, d});

    // Noisy latent to tokens, channel concat, input projection.
    auto z_leaf = tape.leaf(z_t);
    auto z_tok = tape.reshape(tape.permute4(z_leaf, {0, 2, 3, 1}), Shape{n_tok, cl});
    auto x = tape.linear(tape.concat_cols(z_tok, cond_tok), P("in_proj.w"), P("in_proj.b"));

    // Conditioning vector: timestep and augmentation-level sinusoids share the
    // round(1000 x) discretization; the text slot (zeros = null prompt) joins
    // through a learned projection.
    int tstep = static_cast<int>(std::lround(1000.0 * t));
    int astep = static_cast<int>(std::lround(1000.0 * aug_level));
    auto emb = tape.leaf(add(sinusoidal_embedding(tstep, d), sinusoidal_embedding(astep, d)));
    Tensor text_row(Shape{1, cfg.text_dim});
    if (text_slot.numel() > 0) text_row.data = text_slot.data;
    auto base =
        tape.silu(tape.add(emb, tape.linear(tape.leaf(text_row), P("text.w"), P("text.b"))));

    const WindowPartition part = make_windows(hh, ww, cfg.window_h, cfg.window_w);
    const TemporalUnitPlan tplan{cfg.temporal_unit};

    for (int b = 0; b < cfg.depth; ++b) {
        const std::string p = "blk" + std::to_string(b) + ".";
        auto mod = tape.linear(base, P(p + "mod.w"), P(p + "mod.b"));
        auto sa = tape.slice_cols(mod, 0, d);
        auto ta = tape.slice_cols(mod, d, 2 * d);
        auto sf = tape.slice_cols(mod, 2 * d, 3 * d);
        auto tf = tape.slice_cols(mod, 3 * d, 4 * d);

        auto a_in =
            tape.row_affine(tape.layer_norm_rows(x, P(p + "ln1.g"), P(p + "ln1.b")), sa, ta);
        auto q = tape.linear(a_in, P(p + "attn.wq"), P(p + "attn.bq"));
        auto k = tape.linear(a_in, P(p + "attn.wk"));
        auto v = tape.linear(a_in, P(p + "attn.wv"), P(p + "attn.bv"));
        // The sparse top-k selection reads the computed q/k values; the plan
        // itself is treated as a constant by the backward pass (the selection
        // is piecewise constant in the parameters).
        int layer = cfg.temporal_shifts ? b : 0;
        bool swin_shifted =
            cfg.temporal_shifts && cfg.attn_mode == AttnMode::kSwin && (b % 2 == 1);
        TokenGrid qg(tl, hh, ww, tape.val(q));
        TokenGrid kg(tl, hh, ww, tape.val(k));
        AttentionPlan plan = interleaved_plan(qg, kg, cfg.heads, tplan, layer, cfg.attn_mode,
                                              part, cfg.top_k, swin_shifted);
        auto att = tape.attention(q, k, v, cfg.heads, plan);
        x = tape.add(x, tape.linear(att, P(p + "attn.wo"), P(p + "attn.bo")));

        auto f_in =
            tape.row_affine(tape.layer_norm_rows(x, P(p + "ln2.g"), P(p + "ln2.b")), sf, tf);
        auto hidden = tape.silu(tape.linear(f_in, P(p + "ff.w1"), P(p + "ff.b1")));
        x = tape.add(x, tape.linear(hidden, P(p + "ff.w2"), P(p + "ff.b2")));
    }

    auto y = tape.layer_norm_rows(x, P("final_ln.g"), P("final_ln.b"));
    auto v_tok = tape.linear(y, P("out.w"), P("out.b"));

    // Embedding-gated skips: v += gz(t,a,text) * z_t + gc(t,a,text) * up(c).
    // row_affine computes x*(1+s)+t, so subtract one from the raw gains to get
    // a pure gate that is exactly zero at init.
    auto gains = tape.linear(base, P("skip.w"), P("skip.b"));
    auto ones_row = tape.leaf(Tensor::full(Shape{1, cl}, 1.0f));
    auto zeros_row = tape.leaf(Tensor::zeros(Shape{1, cl}));
    auto gz = tape.sub(tape.slice_cols(gains, 0, cl), ones_row);
    auto gc = tape.sub(tape.slice_cols(gains, cl, 2 * cl), ones_row);
    auto cup_tok = tape.reshape(
        tape.permute4(tape.bilinear_last2(c_leaf, hh, ww), {0, 2, 3, 1}), Shape{n_tok, cl});
    v_tok = tape.add(v_tok, tape.row_affine(z_tok, gz, zeros_row));
    v_tok = tape.add(v_tok, tape.row_affine(cup_tok, gc, zeros_row));
    return tape.permute4(tape.reshape(v_tok, Shape{tl, hh, ww, cl}), {0, 3, 1, 2});
}

}  // namespace

Tensor GvrModel::forward(const Tensor& z_t, double t, const Tensor& c_aug, double aug_level,
                         const Tensor& text_slot) const {
    config.validate();
    verify_params(*this, "forward");
    GradTape tape;
    ParamIds P = register_params(tape, *this, /*requires_grad=*/false);
    return tape.val(build_forward(tape, config, P, z_t, t, c_aug, aug_level, text_slot));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void validate_batch(const TrainBatch& batch, const GvrConfig& cfg, const std::string& what) {
    check(batch.z0.data.ndim() == 4 && batch.c0.data.ndim() == 4,
          what + ": latents must be rank-4 (Tl, Cl, H, W)");
    check(batch.z0.cl() == cfg.latent_channels && batch.c0.cl() == cfg.latent_channels,
          what + ": latent channels do not match the config");
    check(batch.z0.tl() == batch.c0.tl(), what + ": HR and LR latent frame counts differ");
    check(batch.z0.hl() == batch.c0.hl() * cfg.upsample &&
              batch.z0.wl() == batch.c0.wl() * cfg.upsample,
          what + ": LR extents x upsample factor must equal HR extents");
    check(batch.text_slot.numel() == 0 ||
              batch.text_slot.numel() == static_cast<int64_t>(cfg.text_dim),
          what + ": text slot width does not match the config");
}

bool text_dropout_draw(Rng& rng, double p) { return rng.uniform() < p; }

namespace {

// Decoupled-weight-decay Adam (the default) and momentum SGD, both with the
// decay applied directly to the parameter, never through the moments.
struct Optimizer {
    const TrainOptions* opt = nullptr;
    std::vector<Tensor> m1, m2;
    int64_t t = 0;

    explicit Optimizer(const GvrModel& model, const TrainOptions& o) : opt(&o) {
        m1.reserve(model.params.size());
        for (const ParamBlock& p : model.params) m1.push_back(Tensor::zeros(p.value.shape));
        if (o.optimizer == OptimizerKind::kAdamW) {
            m2.reserve(model.params.size());
            for (const ParamBlock& p : model.params) m2.push_back(Tensor::zeros(p.value.shape));
        }
    }

    void step(GvrModel& model, const std::vector<Tensor>& grads) {
        ++t;
        const double lr = opt->lr, wd = opt->weight_decay;
        if (opt->optimizer == OptimizerKind::kAdamW) {
            const double b1 = opt->beta1, b2 = opt->beta2, eps = opt->adam_eps;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
            for (size_t p = 0; p < model.params.size(); ++p) {
                Tensor& w = model.params[p].value;
                for (size_t i = 0; i < w.data.size(); ++i) {
                    double g = grads[p].data[i];
                    double m = b1 * m1[p].data[i] + (1.0 - b1) * g;
                    double v = b2 * m2[p].data[i] + (1.0 - b2) * g * g;
                    m1[p].data[i] = static_cast<float>(m);
                    m2[p].data[i] = static_cast<float>(v);
                    double update = (m / c1) / (std::sqrt(v / c2) + eps) + wd * w.data[i];
                    w.data[i] = static_cast<float>(w.data[i] - lr * update);
                }
            }
        } else {
            const double mom = opt->momentum;
            for (size_t p = 0; p < model.params.size(); ++p) {
                Tensor& w = model.params[p].value;
                for (size_t i = 0; i < w.data.size(); ++i) {
                    double vel = mom * m1[p].data[i] + grads[p].data[i];
                    m1[p].data[i] = static_cast<float>(vel);
                    w.data[i] = static_cast<float>(w.data[i] - lr * (vel + wd * w.data[i]));
                }
            }
        }
    }
};

}  // namespace

TrainResult train(GvrModel& model, const std::vector<TrainBatch>& dataset,
                  const TrainOptions& opt) {
    model.config.validate();
    verify_params(model, "train");
    check(!dataset.empty(), "train: dataset is empty");
    check(opt.steps >= 1, "train: steps must be >= 1");
    check(opt.lr > 0.0, "train: learning rate must be positive");
    check(opt.text_dropout >= 0.0 && opt.text_dropout <= 1.0,
          "train: text dropout must be a probability");
    for (size_t i = 0; i < dataset.size(); ++i)
        validate_batch(dataset[i], model.config, "train: batch " + std::to_string(i));
    const bool detail_aware = model.config.sampler == SamplerKind::kDetailAware;
    if (detail_aware) {
        check(opt.timestep_dist != nullptr,
              "train: the detail-aware sampler needs a timestep distribution (build one from "
              "collect_traces)");
        opt.timestep_dist->validate();
    }

    Optimizer optim(model, opt);
    Rng base(opt.seed);
    TrainResult result;
    result.rows.reserve(static_cast<size_t>(opt.steps));

    for (int s = 0; s < opt.steps; ++s) {
        // Every step owns an RNG stream, so the trace is a pure function of
        // (seed, config, data) no matter how batches are assembled.
        Rng rng = base.at_stream(static_cast<uint64_t>(s));
        const TrainBatch& batch = dataset[rng.below(dataset.size())];
        double t = detail_aware ? sample_timestep(*opt.timestep_dist, rng)
                                : sample_timestep_uniform(rng);
        Tensor eps = randn(rng, batch.z0.data.shape);
        FlowState state = add_noise(batch.z0.data, t, eps);
        auto aug = apply_noise_augmentation(batch.c0, model.config.aug_lo, model.config.aug_hi,
                                            rng);
        bool drop = text_dropout_draw(rng, opt.text_dropout);
        Tensor text = drop ? Tensor{} : batch.text_slot;

        std::vector<Tensor> grads;
        double loss = loss_and_grads(model, state.z_t, t, aug.first.data, aug.second.level,
                                     text, sub(eps, batch.z0.data), &grads);
        check_finite_msg(std::isfinite(loss),
                         "train: non-finite loss at step " + std::to_string(s));
        optim.step(model, grads);
        for (const ParamBlock& p : model.params)
            check_finite_msg(p.value.all_finite(), "train: non-finite parameter '" + p.name +
                                                       "' after step " + std::to_string(s));

        result.rows.push_back(LossRow{s, loss, state.timestep(), aug.second.level});
    }

    if (!opt.loss_csv.empty()) write_loss_csv(result.rows, opt.loss_csv);
    if (!opt.checkpoint_out.empty()) save_checkpoint(model, opt.checkpoint_out);
    return result;
}

double loss_and_grads(const GvrModel& model, const Tensor& z_t, double t, const Tensor& c_aug,
                      double aug_level, const Tensor& text_slot, const Tensor& target,
                      std::vector<Tensor>* grads) {
    model.config.validate();
    verify_params(model, "loss_and_grads");
    GradTape tape;
    ParamIds P = register_params(tape, model, /*requires_grad=*/grads != nullptr);
    auto v = build_forward(tape, model.config, P, z_t, t, c_aug, aug_level, text_slot);
    check(same_shape(tape.val(v).shape, target.shape), "loss_and_grads: target shape mismatch");
    auto loss_node = tape.mse_to(v, target);
    double loss = tape.val(loss_node)[0];
    if (grads) {
        tape.backward(loss_node);
        grads->clear();
        grads->reserve(model.params.size());
        for (GradTape::NodeId id : P.ids) grads->push_back(tape.grad(id));
    }
    return loss;
}

TrainResult extend_temporal(GvrModel& model, const GvrConfig& long_config,
                            const std::vector<TrainBatch>& dataset, const TrainOptions& opt) {
    long_config.validate();
    verify_params(model, "extend_temporal");
    auto before = param_schema(model.config);
    auto after = param_schema(long_config);
    bool same = before.size() == after.size();
    for (size_t i = 0; same && i < before.size(); ++i)
        same = before[i].name == after[i].name && same_shape(before[i].shape, after[i].shape);
    check(same,
          "extend_temporal: the new config changes the parameter set; only attention geometry "
          "and sampling fields may differ");
    for (size_t i = 0; i < dataset.size(); ++i)
        check(dataset[i].z0.tl() >= long_config.temporal_unit,
              "extend_temporal: batch " + std::to_string(i) + " latent length " +
                  std::to_string(dataset[i].z0.tl()) + " is shorter than the temporal unit " +
                  std::to_string(long_config.temporal_unit));
    model.config = long_config;
    return train(model, dataset, opt);
}

void write_loss_csv(const std::vector<LossRow>& rows, const std::string& path) {
    CsvTable table;
    table.columns = {"step", "loss", "timestep_drawn", "aug_level"};
    table.rows.reserve(rows.size());
    for (const LossRow& r : rows)
        table.rows.push_back({std::to_string(r.step), fmt_num(r.loss),
                              std::to_string(r.timestep_drawn), fmt_num(r.aug_level)});
    emit_report(table, path);
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

ModelVelocity::ModelVelocity(const GvrModel& model, double aug_level, Tensor text_slot)
    : model_(&model), aug_level_(aug_level), text_(std::move(text_slot)) {}

Tensor ModelVelocity::evaluate(const Tensor& z_t, double t, const Tensor& condition) const {
    check(condition.ndim() == 4,
          "ModelVelocity: condition must be the (Tl, Cl, hl, wl) conditioning latent");
    uint64_t h = fnv1a(condition.ptr(), condition.data.size() * sizeof(float));
    if (!cond_seen_) {
        cond_seen_ = true;
        cond_hash_ = h;
    } else {
        check_runtime(h == cond_hash_,
                      "ModelVelocity: conditioning latent changed between denoising steps");
    }
    return model_->forward(z_t, t, condition, aug_level_, text_);
}

Latent infer(const GvrModel& model, const Latent& c0, int steps, double aug_level, Rng& rng) {
    model.config.validate();
    check(c0.data.ndim() == 4, "infer: conditioning latent must be rank-4");
    check(c0.cl() == model.config.latent_channels,
          "infer: conditioning latent has " + std::to_string(c0.cl()) +
              " channels, config expects " + std::to_string(model.config.latent_channels));
    check(aug_level >= 0.0 && aug_level <= 1.0, "infer: aug level must lie in [0, 1]");
    auto aug = apply_noise_augmentation(c0, aug_level, aug_level, rng);
    Shape hr{c0.tl(), c0.cl(), c0.hl() * model.config.upsample,
             c0.wl() * model.config.upsample};
    Tensor z_noise = randn(rng, hr);
    ModelVelocity field(model, aug.second.level);
    Latent out;
    out.data = ode_sample(field, z_noise, steps, aug.first.data, rng);
    out.codec = c0.codec;
    out.frame_rate = c0.frame_rate;
    return out;
}

std::vector<InferenceTrace> collect_traces(const GvrModel& model,
                                           const std::vector<Latent>& lr_latents, int steps,
                                           double aug_level, uint64_t seed) {
    check(!lr_latents.empty(), "collect_traces: need at least one conditioning latent");
    std::vector<InferenceTrace> traces(lr_latents.size());
    for (size_t i = 0; i < lr_latents.size(); ++i) {
        Rng rng(seed, i);
        auto aug = apply_noise_augmentation(lr_latents[i], aug_level, aug_level, rng);
        Shape hr{lr_latents[i].tl(), lr_latents[i].cl(),
                 lr_latents[i].hl() * model.config.upsample,
                 lr_latents[i].wl() * model.config.upsample};
        Tensor z_noise = randn(rng, hr);
        ModelVelocity field(model, aug.second.level);
        ode_sample(field, z_noise, steps, aug.first.data, rng, &traces[i]);
    }
    return traces;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void put_u32(std::vector<unsigned char>& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

uint32_t take_u32(const std::vector<unsigned char>& buf, size_t& off) {
    check_runtime(off + 4 <= buf.size(), "checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[off + i]) << (8 * i);
    off += 4;
    return v;
}

uint64_t take_u64(const std::vector<unsigned char>& buf, size_t& off) {
    check_runtime(off + 8 <= buf.size(), "checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[off + i]) << (8 * i);
    off += 8;
    return v;
}

}  // namespace

void save_checkpoint(const GvrModel& model, const std::string& path) {
    model.config.validate();
    verify_params(model, "save_checkpoint");
    std::vector<unsigned char> buf;
    buf.push_back('G');
    buf.push_back('V');
    buf.push_back('R');
    buf.push_back('M');
    put_u32(buf, kCheckpointVersion);
    std::string cfg = model.config.canonical();
    put_u64(buf, fnv1a(cfg.data(), cfg.size()));
    put_u32(buf, static_cast<uint32_t>(cfg.size()));
    buf.insert(buf.end(), cfg.begin(), cfg.end());
    put_u32(buf, static_cast<uint32_t>(model.params.size()));
    for (const ParamBlock& p : model.params) {
        put_u32(buf, static_cast<uint32_t>(p.name.size()));
        buf.insert(buf.end(), p.name.begin(), p.name.end());
        put_u32(buf, static_cast<uint32_t>(p.value.ndim()));
        for (int d = 0; d < p.value.ndim(); ++d)
            put_u32(buf, static_cast<uint32_t>(p.value.dim(d)));
        size_t bytes = p.value.data.size() * sizeof(float);
        size_t at = buf.size();
        buf.resize(at + bytes);
        std::memcpy(buf.data() + at, p.value.ptr(), bytes);
    }
    write_file_bytes(path, buf.data(), buf.size());
}

GvrModel load_checkpoint(const std::string& path) {
    std::vector<unsigned char> buf = read_file_bytes(path);
    check_runtime(buf.size() >= 4 && std::memcmp(buf.data(), "GVRM", 4) == 0,
                  "checkpoint: " + path + " is not a GVRM file");
    size_t off = 4;
    uint32_t version = take_u32(buf, off);
    check_runtime(version == kCheckpointVersion,
                  "checkpoint: unsupported version " + std::to_string(version));
    uint64_t digest = take_u64(buf, off);
    uint32_t cfg_len = take_u32(buf, off);
    check_runtime(off + cfg_len <= buf.size(), "checkpoint: truncated file");
    std::string cfg_text(reinterpret_cast<const char*>(buf.data() + off), cfg_len);
    off += cfg_len;
    check_runtime(fnv1a(cfg_text.data(), cfg_text.size()) == digest,
                  "checkpoint: config digest mismatch (corrupt header)");

    GvrModel model;
    model.config = parse_canonical_config(cfg_text);
    auto schema = param_schema(model.config);
    uint32_t n_params = take_u32(buf, off);
    check_runtime(n_params == schema.size(), "checkpoint: expected " +
                                                 std::to_string(schema.size()) +
                                                 " parameter blocks, found " +
                                                 std::to_string(n_params));
    for (uint32_t i = 0; i < n_params; ++i) {
        uint32_t name_len = take_u32(buf, off);
        check_runtime(off + name_len <= buf.size(), "checkpoint: truncated file");
        std::string name(reinterpret_cast<const char*>(buf.data() + off), name_len);
        off += name_len;
        check_runtime(name == schema[i].name, "checkpoint: parameter " + std::to_string(i) +
                                                  " is '" + name + "', expected '" +
                                                  schema[i].name + "'");
        uint32_t ndim = take_u32(buf, off);
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<int>(take_u32(buf, off));
        check_runtime(same_shape(shape, schema[i].shape),
                      "checkpoint: parameter '" + name + "' has shape " + shape_str(shape) +
                          ", expected " + shape_str(schema[i].shape));
        Tensor value(shape);
        size_t bytes = value.data.size() * sizeof(float);
        check_runtime(off + bytes <= buf.size(), "checkpoint: truncated file");
        std::memcpy(value.ptr(), buf.data() + off, bytes);
        off += bytes;
        check_finite_msg(value.all_finite(),
                         "checkpoint: parameter '" + name + "' holds non-finite values");
        model.params.push_back(ParamBlock{name, std::move(value)});
    }
    check_runtime(off == buf.size(), "checkpoint: trailing bytes after the last parameter");
    return model;
}

}  // namespace gvr
