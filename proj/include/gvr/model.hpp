// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gvr/attention.hpp"
#include "gvr/flow_match.hpp"
#include "gvr/latent.hpp"
#include "gvr/rng.hpp"
#include "gvr/tensor.hpp"

namespace gvr {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SamplerKind { kUniform, kDetailAware };

const char* sampler_kind_name(SamplerKind s);
bool parse_sampler_kind(const std::string& name, SamplerKind& out);

// Desk-scale upsampler configuration. The defaults target a 64x64x17 clip
// (latent 5x768x8x8) conditioned on its 32x32 downscale, small enough that
// training and the full test suite run on a laptop CPU.
//
// The latent frame count is not part of the config: every component of the
// network is token- or frame-local except the temporal-unit attention plan,
// which adapts to the input length. That is what makes temporal extension a
// pure re-planning step with zero new parameters.
struct GvrConfig {
    int latent_channels = 768;  // Cl of both the noisy and conditioning latents
    int width = 64;             // model channel dim D
    int heads = 4;
    int depth = 4;  // number of DiT blocks; even, the shift parity rule pairs layers
    AttnMode attn_mode = AttnMode::kFull;
    int window_h = 4;  // swin / sparse-local window extents, tokens
    int window_w = 3;
    int top_k = 1;          // sparse-local selected windows
    int temporal_unit = 5;  // attention unit length U, latent frames
    bool temporal_shifts = true;  // alternate cyclic unit shifts across layers
    double aug_lo = 0.3;          // conditioning noise-augmentation interval
    double aug_hi = 0.6;
    SamplerKind sampler = SamplerKind::kUniform;
    int upsample = 2;      // spatial latent upsample factor LR -> HR
    int text_dim = 8;      // width of the text slot vector (zeros = null prompt)
    int cond_kernel_t = 3;  // temporal extent of the two conditioning convs (odd);
                            // 1 makes the whole network frame-separable
    int ff_mult = 4;        // feed-forward hidden width multiplier

    void validate() const;
    // Canonical key=value;... serialization; two configs are interchangeable
    // iff their canonical strings match.
    std::string canonical() const;
    uint64_t digest() const;
};

GvrConfig parse_canonical_config(const std::string& text);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ParamBlock {
    std::string name;
    Tensor value;
};

// Parameters of the toy SimpleGVR network, in a fixed named order:
// conditioning path (3D conv -> bilinear up -> 3D conv), input projection
// applied to the channel concat of the noisy latent and the conditioning
// features, `depth` pre-norm DiT blocks (attention + feed-forward, modulated
// by an adaptive scale/shift computed per block from the summed timestep /
// augmentation-level / text embeddings), final norm and output projection.
// The output projection starts at zero so an untrained model predicts v = 0.
struct GvrModel {
    GvrConfig config;
    std::vector<ParamBlock> params;

    int64_t param_count() const;
    const Tensor& param(const std::string& name) const;
    Tensor& param(const std::string& name);

    // Velocity prediction v(z_t, t | c_aug, a, text). z_t is (Tl, Cl, H, W),
    // c_aug is (Tl, Cl, H/upsample, W/upsample); the output matches z_t's
    // shape. No gradients are recorded.
    Tensor forward(const Tensor& z_t, double t, const Tensor& c_aug, double aug_level,
                   const Tensor& text_slot = {}) const;
};

GvrModel init_model(const GvrConfig& cfg, Rng& rng);

// Sinusoidal embedding of a discrete index (cos half then sin half, geometric
// frequencies down to 1/10000). Shape (1, dim), constant w.r.t. parameters.
Tensor sinusoidal_embedding(int index, int dim);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// One (HR target, LR condition) latent pair. The text slot may be empty
// (null prompt) or a (text_dim) vector.
struct TrainBatch {
    Latent z0;
    Latent c0;
    Tensor text_slot;
};

void validate_batch(const TrainBatch& batch, const GvrConfig& cfg, const std::string& what);

enum class OptimizerKind { kAdamW, kMomentumSgd };

struct TrainOptions {
    int steps = 500;
    OptimizerKind optimizer = OptimizerKind::kAdamW;
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-4;
    double momentum = 0.9;     // momentum-SGD fallback only
    double text_dropout = 0.1;  // null-prompt replacement probability
    uint64_t seed = 1;
    // Required when the config selects the detail-aware sampler; ignored (may
    // be null) for the uniform sampler.
    const TimestepDistribution* timestep_dist = nullptr;
    std::string loss_csv;        // written when non-empty
    std::string checkpoint_out;  // written when non-empty
};

struct LossRow {
    int step = 0;
    double loss = 0.0;
    int timestep_drawn = 0;   // round(1000 t) of the drawn path time
    double aug_level = 0.0;   // conditioning noise level drawn for the step
};

struct TrainResult {
    std::vector<LossRow> rows;
};

// One optimizer step per batch; batches are drawn uniformly from the dataset
// by a per-step RNG stream, so the trace depends only on (seed, config,
// data). A non-finite loss aborts with the offending step index.
TrainResult train(GvrModel& model, const std::vector<TrainBatch>& dataset,
                  const TrainOptions& opt);

// Temporal extension: keep every parameter, switch the attention plan to
// slice the longer latents into units of `long_config.temporal_unit`, and
// fine-tune. The new config must not change any parameter shape, and every
// dataset latent must be at least one unit long.
TrainResult extend_temporal(GvrModel& model, const GvrConfig& long_config,
                            const std::vector<TrainBatch>& dataset, const TrainOptions& opt);

void write_loss_csv(const std::vector<LossRow>& rows, const std::string& path);

// The 10% null-prompt replacement draw (exposed so its rate is testable).
bool text_dropout_draw(Rng& rng, double p = 0.1);

// One recorded objective evaluation: mean((v - target)^2) with v the model's
// velocity prediction. When `grads` is non-null it receives one gradient
// tensor per parameter block, in parameter order. This is the training
// objective's diagnostic surface (gradient checks, custom loops).
double loss_and_grads(const GvrModel& model, const Tensor& z_t, double t, const Tensor& c_aug,
                      double aug_level, const Tensor& text_slot, const Tensor& target,
                      std::vector<Tensor>* grads);

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

// Adapts a GvrModel to the VelocityField interface. `condition` must be the
// (Tl, Cl, hl, wl) noise-augmented conditioning latent data; it is hashed on
// every call and must stay bitwise identical for the lifetime of the field --
// the conditioning latent is fixed across a denoising run by contract.
class ModelVelocity : public VelocityField {
  public:
    ModelVelocity(const GvrModel& model, double aug_level, Tensor text_slot = {});
    Tensor evaluate(const Tensor& z_t, double t, const Tensor& condition) const override;

  private:
    const GvrModel* model_;
    double aug_level_;
    Tensor text_;
    mutable bool cond_seen_ = false;
    mutable uint64_t cond_hash_ = 0;
};

// Full upsampling run: noise-augment c0 at the fixed `aug_level`, start from
// z_T ~ N(0, I) at the upsampled extents, integrate the model's velocity
// field down to t = 0. Returns the predicted HR latent.
Latent infer(const GvrModel& model, const Latent& c0, int steps, double aug_level, Rng& rng);

// One denoising run per conditioning latent (clip i uses RNG stream i of
// `seed`), recording predict_clean at every step. Feeds the detail-aware
// sampler builder.
std::vector<InferenceTrace> collect_traces(const GvrModel& model,
                                           const std::vector<Latent>& lr_latents, int steps,
                                           double aug_level, uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

// Flat binary container: magic "GVRM", version u32, config digest u64, the
// canonical config string, then named parameter blocks (name, extents, f32
// payload), everything little-endian.
void save_checkpoint(const GvrModel& model, const std::string& path);
GvrModel load_checkpoint(const std::string& path);

}  // namespace gvr
