// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "gvr/curation.hpp"
#include "gvr/degrade.hpp"
#include "gvr/model.hpp"

namespace gvr {

// The JSON document driving the pipelines. Sections: flow_degrade, sdedit,
// model, train, sampler, attention, curation. Every key is optional and
// defaults to the value documented in configs/schema.json; unknown keys are
// rejected with the offending JSON pointer path.

struct SdeditSection {
    double alpha = 0.4;
    int steps = 5;
};

struct TrainSection {
    int steps = 500;
    OptimizerKind optimizer = OptimizerKind::kAdamW;
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    double text_dropout = 0.1;
    uint64_t seed = 1;
    // Synthetic-dataset geometry for the bundled training stages.
    int clips = 64;
    int frames = 17;
    int size = 64;
    int holdout = 8;  // clips reserved for evaluation, drawn past the train set
};

struct SamplerSection {
    double hf_cut = 0.5;
    int trace_clips = 16;
    int trace_steps = 20;
};

struct PipelineConfig {
    FlowDegradeParams flow_degrade;
    SdeditSection sdedit;
    GvrConfig model;  // covers the model, attention, and sampler-kind fields
    TrainSection train;
    SamplerSection sampler;
    CurationOptions curation;
};

const char* optimizer_kind_name(OptimizerKind k);
bool parse_optimizer_kind(const std::string& name, OptimizerKind& out);

// Range checks across sections (model.validate() plus the plumbing fields).
void validate_pipeline_config(const PipelineConfig& cfg);

// Parse/serialize with fixed key order, so serialize(parse(s)) is a byte
// fixed point. `origin` names the source in error messages.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::string& origin = "config");
std::string serialize_pipeline_config(const PipelineConfig& cfg);

PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::string& path);

// The train section mapped onto the training loop's options (CSV/checkpoint
// paths and the timestep distribution stay with the caller).
TrainOptions train_options_from(const PipelineConfig& cfg);

}  // namespace gvr
