// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gvr/latent.hpp"
#include "gvr/rng.hpp"

namespace gvr {

// A point on the linear noising path z_t = (1 - t) z0 + t eps; t = 1 is pure
// noise. Discrete timesteps use the round(1000 t) convention throughout.
struct FlowState {
    Tensor z_t;
    double t = 0.0;

    int timestep() const { return static_cast<int>(std::lround(1000.0 * t)); }
};

// Velocity field v(z_t, t, condition). Implementations must be deterministic
// in their inputs and return a tensor of the input shape. `condition` may be
// an empty tensor for unconditional fields.
class VelocityField {
  public:
    virtual ~VelocityField() = default;
    virtual Tensor evaluate(const Tensor& z_t, double t, const Tensor& condition) const = 0;
};

// Ground-truth field of the linear path: v = eps - z0 everywhere. Under it the
// matching loss vanishes and Euler integration is exact at any step count.
class OracleLinearVelocity : public VelocityField {
  public:
    OracleLinearVelocity(const Tensor& z0, const Tensor& eps);
    Tensor evaluate(const Tensor& z_t, double t, const Tensor& condition) const override;

  private:
    Tensor target_;
};

// Fixed affine field v = k (z - bias). Integrating it backward contracts the
// state toward `bias`, a cheap stand-in for a denoiser in corruption tests.
class ContractiveToyVelocity : public VelocityField {
  public:
    explicit ContractiveToyVelocity(float k = 0.7f, float bias = 0.0f) : k_(k), bias_(bias) {}
    Tensor evaluate(const Tensor& z_t, double t, const Tensor& condition) const override;

  private:
    float k_;
    float bias_;
};

// z_t = (1 - t) z0 + t eps. Endpoints are exact: t = 0 returns z0 bitwise and
// t = 1 returns eps bitwise.
FlowState add_noise(const Tensor& z0, double t, const Tensor& eps);

// Mean squared error between the regression target (eps - z0) and the model's
// velocity at the corresponding path point.
double cfm_loss(const VelocityField& model, const Tensor& z0, const Tensor& eps, double t,
                const Tensor& condition);

// Algebraic inversion of the path under the linear velocity: z0_hat = z_t - t v.
Tensor predict_clean(const Tensor& z_t, double t, const Tensor& v);

// Clean-signal predictions recorded along a sampling run, one entry per
// denoising step (evaluated at t = 1, 1 - 1/S, ..., 1/S).
struct InferenceTrace {
    std::vector<Tensor> pred_clean;
};

// Euler integration of dz/dt = v from t = 1 down to 0 on a uniform grid:
// z <- z - (1/steps) v(z, t). The condition tensor is held fixed across
// steps. `rng` is unused by the deterministic Euler scheme; it is part of the
// call surface so stochastic solvers can slot in without touching call sites.
// When `trace` is given, predict_clean(z, t, v) is recorded at every step.
Tensor ode_sample(const VelocityField& model, const Tensor& z_noise, int steps,
                  const Tensor& condition, Rng& rng, InferenceTrace* trace = nullptr);

// Partial corruption + partial denoise: c_alpha = (1 - alpha) c0 + alpha eps
// with eps drawn from `rng` (the first and only draw), then the ODE runs from
// t = alpha down to 0 in `steps` Euler steps. alpha = 0 returns c0 untouched.
Latent sdedit_degrade(const VelocityField& model, const Latent& c0, double alpha, int steps,
                      Rng& rng);

// t ~ U[0, 1).
double sample_timestep_uniform(Rng& rng);

// Piecewise-uniform distribution over [0, 1]: `edges` has size() = bins + 1,
// ascending; probs[i] is the mass of [edges[i], edges[i+1]).
struct TimestepDistribution {
    std::vector<double> edges;
    std::vector<double> probs;

    void validate() const;
};

// Inverse-CDF draw: a bin by its probability, then uniform within the bin.
double sample_timestep(const TimestepDistribution& dist, Rng& rng);

// High-frequency DCT coefficients of a latent-shaped (T, C, H, W) tensor:
// every plane's coefficients with normalized index (u/H + v/W) / 2 >= hf_cut,
// concatenated in (t, c, u, v) order.
std::vector<float> high_freq_coeffs(const Tensor& latent_data, double hf_cut);

// Weight denoising steps by how much high-frequency detail they add:
// Delta_i = L1 difference of high_freq_coeffs between consecutive clean-signal
// predictions, averaged over traces, normalized into a distribution. Bin i
// covers the time interval of step i, so the bins tile [1/S, 1].
TimestepDistribution build_detail_aware_sampler(const std::vector<InferenceTrace>& traces,
                                                double hf_cut);

// CSV with columns bin_lo, bin_hi, probability.
void write_timestep_csv(const TimestepDistribution& dist, const std::string& path);
TimestepDistribution read_timestep_csv(const std::string& path);

// Weight-per-timestep curve (probability against the bin-centre discrete
// timestep) as an SVG line plot.
void write_weight_curve_svg(const TimestepDistribution& dist, const std::string& path);

// One draw of conditioning-noise augmentation: level a ~ U[lo, hi], mapped to
// the discrete timestep round(1000 a) (so [0.3, 0.6] <-> steps 300..600).
struct NoiseAugmentation {
    double lo = 0.3;
    double hi = 0.6;
    double level = 0.0;

    int timestep() const { return static_cast<int>(std::lround(1000.0 * level)); }
};

// c_aug = (1 - a) c + a eps with a ~ U[lo, hi]; the level is returned so the
// model can condition on it.
std::pair<Latent, NoiseAugmentation> apply_noise_augmentation(const Latent& c, double lo,
                                                              double hi, Rng& rng);

}  // namespace gvr
