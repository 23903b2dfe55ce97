// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/flow_match.hpp"

#include <algorithm>
#include <cmath>

#include "gvr/media_io.hpp"
#include "gvr/signal.hpp"

namespace gvr {

namespace {

void check_unit_time(double t, const char* who) {
    check(t >= 0.0 && t <= 1.0,
          std::string(who) + ": t must be in [0, 1], got " + std::to_string(t));
}

}  // namespace

OracleLinearVelocity::OracleLinearVelocity(const Tensor& z0, const Tensor& eps)
    : target_(sub(eps, z0)) {}

Tensor OracleLinearVelocity::evaluate(const Tensor& z_t, double, const Tensor&) const {
    check(same_shape(z_t.shape, target_.shape),
          "OracleLinearVelocity: state shape " + shape_str(z_t.shape) +
              " does not match the fixture " + shape_str(target_.shape));
    return target_;
}

Tensor ContractiveToyVelocity::evaluate(const Tensor& z_t, double, const Tensor&) const {
    Tensor out(z_t.shape);
    for (size_t i = 0; i < z_t.data.size(); ++i) out.data[i] = k_ * (z_t.data[i] - bias_);
    return out;
}

FlowState add_noise(const Tensor& z0, double t, const Tensor& eps) {
    check(same_shape(z0.shape, eps.shape), "add_noise: z0 shape " + shape_str(z0.shape) +
                                               " does not match eps " + shape_str(eps.shape));
    check_unit_time(t, "add_noise");
    FlowState state;
    state.z_t = lerp(z0, eps, static_cast<float>(t));
    state.t = t;
    return state;
}

double cfm_loss(const VelocityField& model, const Tensor& z0, const Tensor& eps, double t,
                const Tensor& condition) {
    FlowState state = add_noise(z0, t, eps);
    Tensor v = model.evaluate(state.z_t, t, condition);
    return mse(sub(eps, z0), v);
}

Tensor predict_clean(const Tensor& z_t, double t, const Tensor& v) {
    check(same_shape(z_t.shape, v.shape), "predict_clean: state shape " + shape_str(z_t.shape) +
                                              " does not match velocity " + shape_str(v.shape));
    check_unit_time(t, "predict_clean");
    return add_scaled(z_t, v, static_cast<float>(-t));
}

Tensor ode_sample(const VelocityField& model, const Tensor& z_noise, int steps,
                  const Tensor& condition, Rng&, InferenceTrace* trace) {
    check(steps >= 1, "ode_sample: steps must be >= 1, got " + std::to_string(steps));
    Tensor z = z_noise;
    const double dt = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = 1.0 - i * dt;
        Tensor v = model.evaluate(z, t, condition);
        if (trace != nullptr) trace->pred_clean.push_back(predict_clean(z, t, v));
        z = add_scaled(z, v, static_cast<float>(-dt));
        check_finite_msg(z.all_finite(),
                         "ode_sample: non-finite state after step " + std::to_string(i));
    }
    return z;
}

Latent sdedit_degrade(const VelocityField& model, const Latent& c0, double alpha, int steps,
                      Rng& rng) {
    validate_latent(c0, "sdedit_degrade input");
    check(alpha >= 0.0 && alpha <= 1.0,
          "sdedit_degrade: alpha must be in [0, 1], got " + std::to_string(alpha));
    check(steps >= 1, "sdedit_degrade: steps must be >= 1, got " + std::to_string(steps));
    if (alpha == 0.0) return c0;  // no noise, no integration interval

    Tensor eps = randn(rng, c0.data.shape);
    Tensor z = lerp(c0.data, eps, static_cast<float>(alpha));
    const double dt = alpha / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = alpha - i * dt;
        Tensor v = model.evaluate(z, t, Tensor{});
        z = add_scaled(z, v, static_cast<float>(-dt));
        check_finite_msg(z.all_finite(),
                         "sdedit_degrade: non-finite state after step " + std::to_string(i));
    }
    Latent out;
    out.data = std::move(z);
    out.codec = c0.codec;
    out.frame_rate = c0.frame_rate;
    return out;
}

double sample_timestep_uniform(Rng& rng) { return rng.uniform(); }

void TimestepDistribution::validate() const {
    check(probs.size() >= 1 && edges.size() == probs.size() + 1,
          "timestep distribution needs bins+1 edges, got " + std::to_string(edges.size()) +
              " edges for " + std::to_string(probs.size()) + " bins");
    check(edges.front() >= 0.0 && edges.back() <= 1.0,
          "timestep distribution edges must lie in [0, 1]");
    for (size_t i = 0; i + 1 < edges.size(); ++i)
        check(edges[i] < edges[i + 1], "timestep distribution edges must be ascending");
    double total = 0.0;
    for (double p : probs) {
        check(p >= 0.0, "timestep distribution probabilities must be non-negative");
        total += p;
    }
    check(std::abs(total - 1.0) <= 1e-6,
          "timestep distribution must sum to 1, got " + std::to_string(total));
}

double sample_timestep(const TimestepDistribution& dist, Rng& rng) {
    dist.validate();
    double total = 0.0;
    for (double p : dist.probs) total += p;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    size_t last_positive = 0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        const double p = dist.probs[i];
        if (p <= 0.0) continue;
        if (u < acc + p) {
            const double frac = (u - acc) / p;
            return dist.edges[i] + frac * (dist.edges[i + 1] - dist.edges[i]);
        }
        acc += p;
        last_positive = i;
    }
    return dist.edges[last_positive];  // rounding fell off the end
}

std::vector<float> high_freq_coeffs(const Tensor& latent_data, double hf_cut) {
    check(latent_data.ndim() == 4, "high_freq_coeffs expects a (T, C, H, W) tensor, got " +
                                       shape_str(latent_data.shape));
    check(hf_cut > 0.0 && hf_cut < 1.0,
          "high_freq_coeffs: hf_cut must be in (0, 1), got " + std::to_string(hf_cut));
    const int t = latent_data.dim(0), c = latent_data.dim(1);
    const int h = latent_data.dim(2), w = latent_data.dim(3);
    std::vector<float> out;
    Tensor plane({h, w});
    for (int ti = 0; ti < t; ++ti) {
        for (int ci = 0; ci < c; ++ci) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) plane.at(y, x) = latent_data.at(ti, ci, y, x);
            Tensor coef = dct2d(plane);
            for (int u = 0; u < h; ++u)
                for (int v = 0; v < w; ++v) {
                    const double norm_idx =
                        (static_cast<double>(u) / h + static_cast<double>(v) / w) / 2.0;
                    if (norm_idx >= hf_cut) out.push_back(coef.at(u, v));
                }
        }
    }
    return out;
}

TimestepDistribution build_detail_aware_sampler(const std::vector<InferenceTrace>& traces,
                                                double hf_cut) {
    check(!traces.empty(), "build_detail_aware_sampler: need at least one trace");
    const size_t steps = traces.front().pred_clean.size();
    check(steps >= 2, "build_detail_aware_sampler: traces need at least 2 steps, got " +
                          std::to_string(steps));

    std::vector<double> delta(steps - 1, 0.0);
    double mass = 0.0;  // mean per-step L1 of the coefficients themselves
    for (const InferenceTrace& trace : traces) {
        check(trace.pred_clean.size() == steps,
              "build_detail_aware_sampler: traces disagree on step count");
        std::vector<float> prev = high_freq_coeffs(trace.pred_clean[0], hf_cut);
        for (float v : prev) mass += std::abs(static_cast<double>(v));
        for (size_t i = 1; i < steps; ++i) {
            std::vector<float> cur = high_freq_coeffs(trace.pred_clean[i], hf_cut);
            check(cur.size() == prev.size(),
                  "build_detail_aware_sampler: trace steps disagree on latent shape");
            double l1 = 0.0;
            for (size_t j = 0; j < cur.size(); ++j) {
                l1 += std::abs(static_cast<double>(cur[j]) - prev[j]);
                mass += std::abs(static_cast<double>(cur[j]));
            }
            delta[i - 1] += l1 / static_cast<double>(traces.size());
            prev = std::move(cur);
        }
    }
    mass /= static_cast<double>(traces.size() * steps);

    double total = 0.0;
    for (double d : delta) total += d;
    // Constant predictions give total == 0; predictions that only differ by
    // float rounding of the ODE arithmetic give a total a few ulp above it.
    // Both mean there is no real high-frequency change to weight.
    check(total > 1e-5 * mass,
          "build_detail_aware_sampler: degenerate trace (no high-frequency change)");

    // Step i runs from t = 1 - i/S to 1 - (i+1)/S, so its delta weights the
    // bin [(S-i-1)/S, (S-i)/S); ascending bins tile [1/S, 1].
    const size_t s = steps;
    TimestepDistribution dist;
    dist.edges.resize(s);
    dist.probs.resize(s - 1);
    for (size_t j = 0; j < s; ++j)
        dist.edges[j] = static_cast<double>(j + 1) / static_cast<double>(s);
    for (size_t j = 0; j + 1 < s; ++j) dist.probs[j] = delta[s - 2 - j] / total;
    dist.validate();
    return dist;
}

void write_timestep_csv(const TimestepDistribution& dist, const std::string& path) {
    dist.validate();
    CsvTable table;
    table.columns = {"bin_lo", "bin_hi", "probability"};
    for (size_t i = 0; i < dist.probs.size(); ++i)
        table.rows.push_back(
            {fmt_num(dist.edges[i]), fmt_num(dist.edges[i + 1]), fmt_num(dist.probs[i])});
    emit_report(table, path);
}

TimestepDistribution read_timestep_csv(const std::string& path) {
    CsvTable table = read_report(path);
    check(table.columns == std::vector<std::string>{"bin_lo", "bin_hi", "probability"},
          "timestep csv: '" + path + "' does not have columns bin_lo,bin_hi,probability");
    TimestepDistribution dist;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        double lo = std::stod(row[0]), hi = std::stod(row[1]), p = std::stod(row[2]);
        if (i == 0) dist.edges.push_back(lo);
        check(std::abs(dist.edges.back() - lo) <= 1e-12,
              "timestep csv: bins of '" + path + "' do not tile contiguously");
        dist.edges.push_back(hi);
        dist.probs.push_back(p);
    }
    dist.validate();
    return dist;
}

void write_weight_curve_svg(const TimestepDistribution& dist, const std::string& path) {
    dist.validate();
    std::vector<double> xs, ys;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        xs.push_back(std::round(1000.0 * (dist.edges[i] + dist.edges[i + 1]) / 2.0));
        ys.push_back(dist.probs[i]);
    }
    emit_curve(xs, ys, path, "detail weight by timestep");
}

std::pair<Latent, NoiseAugmentation> apply_noise_augmentation(const Latent& c, double lo,
                                                              double hi, Rng& rng) {
    // Rank check only: the lerp is pointwise, so desk-scale latents with toy
    // channel counts go through the same code path as codec-shaped ones.
    check(c.data.ndim() == 4, "apply_noise_augmentation input: latent must be (Tl, Cl, Hl, Wl)");
    check(lo >= 0.0 && lo <= hi && hi <= 1.0,
          "apply_noise_augmentation: interval must satisfy 0 <= lo <= hi <= 1, got [" +
              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    NoiseAugmentation aug;
    aug.lo = lo;
    aug.hi = hi;
    aug.level = rng.uniform(lo, hi);
    Tensor eps = randn(rng, c.data.shape);
    Latent out;
    out.data = lerp(c.data, eps, static_cast<float>(aug.level));
    out.codec = c.codec;
    out.frame_rate = c.frame_rate;
    return {std::move(out), aug};
}

}  // namespace gvr
