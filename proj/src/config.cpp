// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "gvr/common.hpp"
#include "json.hpp"

namespace gvr {

using json = nlohmann::ordered_json;

const char* optimizer_kind_name(OptimizerKind k) {
    return k == OptimizerKind::kAdamW ? "adamw" : "sgd";
}

bool parse_optimizer_kind(const std::string& name, OptimizerKind& out) {
    if (name == "adamw") {
        out = OptimizerKind::kAdamW;
        return true;
    }
    if (name == "sgd") {
        out = OptimizerKind::kMomentumSgd;
        return true;
    }
    return false;
}

namespace {

[[noreturn]] void bad(const std::string& origin, const std::string& pointer,
                      const std::string& what) {
    throw ValidationError(origin + ": " + pointer + " " + what);
}

void expect_known(const json& j, const std::string& origin, const std::string& prefix,
                  std::initializer_list<const char*> keys) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ValidationError(origin + ": unknown key at " + prefix + "/" + item.key());
    }
}

const json* section(const json& root, const std::string& origin, const char* name) {
    if (!root.contains(name)) return nullptr;
    const json& s = root.at(name);
    if (!s.is_object()) bad(origin, std::string("/") + name, "must be an object");
    return &s;
}

double get_num(const json& j, const std::string& origin, const std::string& prefix,
               const char* key, double def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) bad(origin, prefix + "/" + key, "must be a number");
    return v.get<double>();
}

int get_int(const json& j, const std::string& origin, const std::string& prefix,
            const char* key, int def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) bad(origin, prefix + "/" + key, "must be an integer");
    return v.get<int>();
}

uint64_t get_u64(const json& j, const std::string& origin, const std::string& prefix,
                 const char* key, uint64_t def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<int64_t>() < 0))
        bad(origin, prefix + "/" + key, "must be a non-negative integer");
    return v.get<uint64_t>();
}

bool get_bool(const json& j, const std::string& origin, const std::string& prefix,
              const char* key, bool def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_boolean()) bad(origin, prefix + "/" + key, "must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& origin, const std::string& prefix,
                    const char* key, const std::string& def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_string()) bad(origin, prefix + "/" + key, "must be a string");
    return v.get<std::string>();
}

// A float field widened to double prints its full binary expansion
// (0.3f -> 0.30000001192092896); emit the float's own shortest decimal
// instead, which parses back to the identical float.
double float_as_double(float v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf) - 1, v);
    *res.ptr = '\0';
    return std::strtod(buf, nullptr);
}

}  // namespace

void validate_pipeline_config(const PipelineConfig& cfg) {
    cfg.model.validate();
    check(cfg.flow_degrade.tau_px >= 0.0f, "config: /flow_degrade/tau_px must be >= 0");
    check(cfg.flow_degrade.block_px >= 1, "config: /flow_degrade/block_px must be >= 1");
    check(cfg.flow_degrade.density >= 0.0f && cfg.flow_degrade.density <= 1.0f,
          "config: /flow_degrade/density must lie in [0, 1]");
    check(cfg.flow_degrade.samples_k >= 1, "config: /flow_degrade/samples_k must be >= 1");
    check(cfg.flow_degrade.strength_min >= 0.0f &&
              cfg.flow_degrade.strength_min <= cfg.flow_degrade.strength_max &&
              cfg.flow_degrade.strength_max <= 1.0f,
          "config: /flow_degrade strength interval must satisfy 0 <= min <= max <= 1");
    check(cfg.sdedit.alpha >= 0.0 && cfg.sdedit.alpha <= 1.0,
          "config: /sdedit/alpha must lie in [0, 1]");
    check(cfg.sdedit.steps >= 1, "config: /sdedit/steps must be >= 1");
    check(cfg.train.steps >= 1, "config: /train/steps must be >= 1");
    check(cfg.train.lr > 0.0, "config: /train/lr must be > 0");
    check(cfg.train.text_dropout >= 0.0 && cfg.train.text_dropout <= 1.0,
          "config: /train/text_dropout must lie in [0, 1]");
    check(cfg.train.clips >= 1, "config: /train/clips must be >= 1");
    check(cfg.train.frames >= 1, "config: /train/frames must be >= 1");
    check(cfg.train.size >= 2, "config: /train/size must be >= 2");
    check(cfg.train.holdout >= 0, "config: /train/holdout must be >= 0");
    check(cfg.sampler.hf_cut > 0.0 && cfg.sampler.hf_cut < 1.0,
          "config: /sampler/hf_cut must lie in (0, 1)");
    check(cfg.sampler.trace_clips >= 1, "config: /sampler/trace_clips must be >= 1");
    check(cfg.sampler.trace_steps >= 2, "config: /sampler/trace_steps must be >= 2");
    check(cfg.curation.brightness_lo <= cfg.curation.brightness_hi,
          "config: /curation brightness interval is inverted");
    check(cfg.curation.laplacian_min >= 0.0, "config: /curation/laplacian_min must be >= 0");
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(origin + ": " + e.what());
    }
    if (!root.is_object()) throw ValidationError(origin + ": top level must be an object");
    expect_known(root, origin, "",
                 {"flow_degrade", "sdedit", "model", "train", "sampler", "attention",
                  "curation"});

    PipelineConfig cfg;

    if (const json* s = section(root, origin, "flow_degrade")) {
        const std::string p = "/flow_degrade";
        expect_known(*s, origin, p,
                     {"tau_px", "block_px", "density", "samples_k", "strength_min",
                      "strength_max"});
        FlowDegradeParams& d = cfg.flow_degrade;
        d.tau_px = static_cast<float>(get_num(*s, origin, p, "tau_px", d.tau_px));
        d.block_px = get_int(*s, origin, p, "block_px", d.block_px);
        d.density = static_cast<float>(get_num(*s, origin, p, "density", d.density));
        d.samples_k = get_int(*s, origin, p, "samples_k", d.samples_k);
        d.strength_min =
            static_cast<float>(get_num(*s, origin, p, "strength_min", d.strength_min));
        d.strength_max =
            static_cast<float>(get_num(*s, origin, p, "strength_max", d.strength_max));
    }

    if (const json* s = section(root, origin, "sdedit")) {
        const std::string p = "/sdedit";
        expect_known(*s, origin, p, {"alpha", "steps"});
        cfg.sdedit.alpha = get_num(*s, origin, p, "alpha", cfg.sdedit.alpha);
        cfg.sdedit.steps = get_int(*s, origin, p, "steps", cfg.sdedit.steps);
    }

    if (const json* s = section(root, origin, "model")) {
        const std::string p = "/model";
        expect_known(*s, origin, p,
                     {"latent_channels", "width", "heads", "depth", "upsample", "text_dim",
                      "cond_kernel_t", "ff_mult", "aug_lo", "aug_hi"});
        GvrConfig& m = cfg.model;
        m.latent_channels = get_int(*s, origin, p, "latent_channels", m.latent_channels);
        m.width = get_int(*s, origin, p, "width", m.width);
        m.heads = get_int(*s, origin, p, "heads", m.heads);
        m.depth = get_int(*s, origin, p, "depth", m.depth);
        m.upsample = get_int(*s, origin, p, "upsample", m.upsample);
        m.text_dim = get_int(*s, origin, p, "text_dim", m.text_dim);
        m.cond_kernel_t = get_int(*s, origin, p, "cond_kernel_t", m.cond_kernel_t);
        m.ff_mult = get_int(*s, origin, p, "ff_mult", m.ff_mult);
        m.aug_lo = get_num(*s, origin, p, "aug_lo", m.aug_lo);
        m.aug_hi = get_num(*s, origin, p, "aug_hi", m.aug_hi);
    }

    if (const json* s = section(root, origin, "train")) {
        const std::string p = "/train";
        expect_known(*s, origin, p,
                     {"steps", "optimizer", "lr", "beta1", "beta2", "adam_eps",
                      "weight_decay", "momentum", "text_dropout", "seed", "clips", "frames",
                      "size", "holdout"});
        TrainSection& t = cfg.train;
        t.steps = get_int(*s, origin, p, "steps", t.steps);
        std::string opt =
            get_str(*s, origin, p, "optimizer", optimizer_kind_name(t.optimizer));
        if (!parse_optimizer_kind(opt, t.optimizer))
            bad(origin, p + "/optimizer", "must be \"adamw\" or \"sgd\", got \"" + opt + "\"");
        t.lr = get_num(*s, origin, p, "lr", t.lr);
        t.beta1 = get_num(*s, origin, p, "beta1", t.beta1);
        t.beta2 = get_num(*s, origin, p, "beta2", t.beta2);
        t.adam_eps = get_num(*s, origin, p, "adam_eps", t.adam_eps);
        t.weight_decay = get_num(*s, origin, p, "weight_decay", t.weight_decay);
        t.momentum = get_num(*s, origin, p, "momentum", t.momentum);
        t.text_dropout = get_num(*s, origin, p, "text_dropout", t.text_dropout);
        t.seed = get_u64(*s, origin, p, "seed", t.seed);
        t.clips = get_int(*s, origin, p, "clips", t.clips);
        t.frames = get_int(*s, origin, p, "frames", t.frames);
        t.size = get_int(*s, origin, p, "size", t.size);
        t.holdout = get_int(*s, origin, p, "holdout", t.holdout);
    }

    if (const json* s = section(root, origin, "sampler")) {
        const std::string p = "/sampler";
        expect_known(*s, origin, p, {"kind", "hf_cut", "trace_clips", "trace_steps"});
        std::string kind =
            get_str(*s, origin, p, "kind", sampler_kind_name(cfg.model.sampler));
        if (!parse_sampler_kind(kind, cfg.model.sampler))
            bad(origin, p + "/kind",
                "must be \"uniform\" or \"detail_aware\", got \"" + kind + "\"");
        cfg.sampler.hf_cut = get_num(*s, origin, p, "hf_cut", cfg.sampler.hf_cut);
        cfg.sampler.trace_clips = get_int(*s, origin, p, "trace_clips", cfg.sampler.trace_clips);
        cfg.sampler.trace_steps = get_int(*s, origin, p, "trace_steps", cfg.sampler.trace_steps);
    }

    if (const json* s = section(root, origin, "attention")) {
        const std::string p = "/attention";
        expect_known(*s, origin, p,
                     {"mode", "window_h", "window_w", "top_k", "temporal_unit",
                      "temporal_shifts"});
        GvrConfig& m = cfg.model;
        std::string mode = get_str(*s, origin, p, "mode", attn_mode_name(m.attn_mode));
        if (!parse_attn_mode(mode, m.attn_mode))
            bad(origin, p + "/mode",
                "must be \"full\", \"swin\" or \"sparse_local\", got \"" + mode + "\"");
        m.window_h = get_int(*s, origin, p, "window_h", m.window_h);
        m.window_w = get_int(*s, origin, p, "window_w", m.window_w);
        m.top_k = get_int(*s, origin, p, "top_k", m.top_k);
        m.temporal_unit = get_int(*s, origin, p, "temporal_unit", m.temporal_unit);
        m.temporal_shifts = get_bool(*s, origin, p, "temporal_shifts", m.temporal_shifts);
    }

    if (const json* s = section(root, origin, "curation")) {
        const std::string p = "/curation";
        expect_known(*s, origin, p,
                     {"brightness_lo", "brightness_hi", "laplacian_min", "musiq_min",
                      "musiq_command"});
        CurationOptions& c = cfg.curation;
        c.brightness_lo = get_num(*s, origin, p, "brightness_lo", c.brightness_lo);
        c.brightness_hi = get_num(*s, origin, p, "brightness_hi", c.brightness_hi);
        c.laplacian_min = get_num(*s, origin, p, "laplacian_min", c.laplacian_min);
        c.musiq_min = get_num(*s, origin, p, "musiq_min", c.musiq_min);
        c.musiq_command = get_str(*s, origin, p, "musiq_command", c.musiq_command);
    }

    validate_pipeline_config(cfg);
    return cfg;
}

std::string serialize_pipeline_config(const PipelineConfig& cfg) {
    json root;
    root["flow_degrade"] = {{"tau_px", float_as_double(cfg.flow_degrade.tau_px)},
                            {"block_px", cfg.flow_degrade.block_px},
                            {"density", float_as_double(cfg.flow_degrade.density)},
                            {"samples_k", cfg.flow_degrade.samples_k},
                            {"strength_min", float_as_double(cfg.flow_degrade.strength_min)},
                            {"strength_max", float_as_double(cfg.flow_degrade.strength_max)}};
    root["sdedit"] = {{"alpha", cfg.sdedit.alpha}, {"steps", cfg.sdedit.steps}};
    root["model"] = {{"latent_channels", cfg.model.latent_channels},
                     {"width", cfg.model.width},
                     {"heads", cfg.model.heads},
                     {"depth", cfg.model.depth},
                     {"upsample", cfg.model.upsample},
                     {"text_dim", cfg.model.text_dim},
                     {"cond_kernel_t", cfg.model.cond_kernel_t},
                     {"ff_mult", cfg.model.ff_mult},
                     {"aug_lo", cfg.model.aug_lo},
                     {"aug_hi", cfg.model.aug_hi}};
    root["train"] = {{"steps", cfg.train.steps},
                     {"optimizer", optimizer_kind_name(cfg.train.optimizer)},
                     {"lr", cfg.train.lr},
                     {"beta1", cfg.train.beta1},
                     {"beta2", cfg.train.beta2},
                     {"adam_eps", cfg.train.adam_eps},
                     {"weight_decay", cfg.train.weight_decay},
                     {"momentum", cfg.train.momentum},
                     {"text_dropout", cfg.train.text_dropout},
                     {"seed", cfg.train.seed},
                     {"clips", cfg.train.clips},
                     {"frames", cfg.train.frames},
                     {"size", cfg.train.size},
                     {"holdout", cfg.train.holdout}};
    root["sampler"] = {{"kind", sampler_kind_name(cfg.model.sampler)},
                       {"hf_cut", cfg.sampler.hf_cut},
                       {"trace_clips", cfg.sampler.trace_clips},
                       {"trace_steps", cfg.sampler.trace_steps}};
    root["attention"] = {{"mode", attn_mode_name(cfg.model.attn_mode)},
                         {"window_h", cfg.model.window_h},
                         {"window_w", cfg.model.window_w},
                         {"top_k", cfg.model.top_k},
                         {"temporal_unit", cfg.model.temporal_unit},
                         {"temporal_shifts", cfg.model.temporal_shifts}};
    root["curation"] = {{"brightness_lo", cfg.curation.brightness_lo},
                        {"brightness_hi", cfg.curation.brightness_hi},
                        {"laplacian_min", cfg.curation.laplacian_min},
                        {"musiq_min", cfg.curation.musiq_min},
                        {"musiq_command", cfg.curation.musiq_command}};
    return root.dump(2) + "\n";
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_pipeline_config(buf.str(), "config '" + path + "'");
}

void save_pipeline_config(const PipelineConfig& cfg, const std::string& path) {
    const std::string text = serialize_pipeline_config(cfg);
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "config: cannot write '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    check(out.good(), "config: short write to '" + path + "'");
}

TrainOptions train_options_from(const PipelineConfig& cfg) {
    TrainOptions opt;
    opt.steps = cfg.train.steps;
    opt.optimizer = cfg.train.optimizer;
    opt.lr = cfg.train.lr;
    opt.beta1 = cfg.train.beta1;
    opt.beta2 = cfg.train.beta2;
    opt.adam_eps = cfg.train.adam_eps;
    opt.weight_decay = cfg.train.weight_decay;
    opt.momentum = cfg.train.momentum;
    opt.text_dropout = cfg.train.text_dropout;
    opt.seed = cfg.train.seed;
    return opt;
}

}  // namespace gvr
