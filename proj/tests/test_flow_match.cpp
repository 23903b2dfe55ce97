// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "gvr/flow_match.hpp"
#include "gvr/media_io.hpp"
#include "gvr/signal.hpp"

using namespace gvr;
namespace fs = std::filesystem;

namespace {

struct ZeroVelocity : VelocityField {
    Tensor evaluate(const Tensor& z_t, double, const Tensor&) const override {
        return Tensor(z_t.shape);
    }
};

// Blows up once t drops to or below `bad_t`.
struct ExplodingVelocity : VelocityField {
    double bad_t;
    explicit ExplodingVelocity(double t) : bad_t(t) {}
    Tensor evaluate(const Tensor& z_t, double t, const Tensor&) const override {
        Tensor v(z_t.shape);
        if (t <= bad_t + 1e-12)
            for (float& x : v.data) x = std::numeric_limits<float>::infinity();
        return v;
    }
};

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return same_shape(a.shape, b.shape) &&
           std::memcmp(a.ptr(), b.ptr(), sizeof(float) * a.data.size()) == 0;
}

Latent random_latent(Rng& rng, int tl, int hl, int wl) {
    Latent lat;
    lat.data = randn(rng, Shape{tl, lat.codec.cl(), hl, wl});
    return lat;
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "gvrlab_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("add_noise endpoints are exact and timesteps round") {
    Rng rng(1, 0);
    Tensor z0 = randn(rng, Shape{3, 4, 5});
    Tensor eps = randn(rng, Shape{3, 4, 5});

    CHECK(bitwise_equal(add_noise(z0, 0.0, eps).z_t, z0));
    CHECK(bitwise_equal(add_noise(z0, 1.0, eps).z_t, eps));

    Tensor two = Tensor::scalar(2.0f);
    Tensor zero = Tensor::scalar(0.0f);
    CHECK(add_noise(two, 0.5, zero).z_t[0] == 1.0f);

    CHECK_THROWS_WITH_AS(add_noise(z0, -0.1, eps), doctest::Contains("[0, 1]"), ValidationError);
    CHECK_THROWS_WITH_AS(add_noise(z0, 1.1, eps), doctest::Contains("[0, 1]"), ValidationError);

    CHECK(add_noise(z0, 0.45, eps).timestep() == 450);
    CHECK(add_noise(z0, 0.4444, eps).timestep() == 444);
    CHECK(add_noise(z0, 1.0, eps).timestep() == 1000);
}

TEST_CASE("cfm_loss vanishes on the oracle and hits the unit-variance expectation") {
    Rng rng(2, 0);
    Tensor z0 = randn(rng, Shape{4, 8, 6, 6});
    Tensor eps = randn(rng, Shape{4, 8, 6, 6});
    OracleLinearVelocity oracle(z0, eps);
    CHECK(cfm_loss(oracle, z0, eps, 0.3, Tensor{}) == 0.0);
    CHECK(cfm_loss(oracle, z0, eps, 0.9, Tensor{}) == 0.0);

    // zero model, z0 = 0: the loss is the mean square of eps, i.e. ~1
    Tensor zeros(Shape{10, 10, 10, 10});
    Tensor unit = randn(rng, Shape{10, 10, 10, 10});
    const double loss = cfm_loss(ZeroVelocity{}, zeros, unit, 0.5, Tensor{});
    CHECK(loss > 0.95);
    CHECK(loss < 1.05);

    ContractiveToyVelocity toy;
    CHECK(cfm_loss(toy, z0, eps, 0.42, Tensor{}) >= 0.0);
}

TEST_CASE("predict_clean inverts the noising path") {
    Rng rng(3, 0);
    Tensor z0 = randn(rng, Shape{2, 6, 4, 4});
    Tensor eps = randn(rng, Shape{2, 6, 4, 4});
    Tensor v = sub(eps, z0);

    for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        FlowState state = add_noise(z0, t, eps);
        CHECK(max_abs_diff(predict_clean(state.z_t, t, v), z0) <= 1e-6);
    }

    // t = 0 ignores the velocity entirely
    Tensor junk = randn(rng, Shape{2, 6, 4, 4});
    CHECK(bitwise_equal(predict_clean(z0, 0.0, junk), z0));

    // a velocity perturbation delta shows up as exactly -t*delta
    Tensor delta = randn(rng, Shape{2, 6, 4, 4});
    const double t = 0.6;
    FlowState state = add_noise(z0, t, eps);
    Tensor vbad = add(v, delta);
    Tensor zhat = predict_clean(state.z_t, t, vbad);
    for (int64_t i = 0; i < zhat.numel(); ++i)
        CHECK(std::abs((zhat[i] - z0[i]) + static_cast<float>(t) * delta[i]) <= 1e-5);
}

TEST_CASE("ode_sample integrates the constant field exactly at any step count") {
    Rng rng(4, 0);
    Tensor z0 = randn(rng, Shape{3, 8, 4, 4});
    Tensor eps = randn(rng, Shape{3, 8, 4, 4});
    OracleLinearVelocity oracle(z0, eps);
    Rng dummy(0, 0);

    for (int steps : {1, 5, 50}) {
        Tensor out = ode_sample(oracle, eps, steps, Tensor{}, dummy);
        CHECK(max_abs_diff(out, z0) <= 1e-5);
    }

    Tensor frozen = ode_sample(ZeroVelocity{}, eps, 10, Tensor{}, dummy);
    CHECK(bitwise_equal(frozen, eps));

    CHECK_THROWS_WITH_AS(ode_sample(oracle, eps, 0, Tensor{}, dummy), doctest::Contains(">= 1"),
                         ValidationError);

    // five steps evaluate at t = 1.0, 0.8, 0.6, ...; the field explodes at 0.6
    CHECK_THROWS_WITH_AS(ode_sample(ExplodingVelocity{0.6}, eps, 5, Tensor{}, dummy),
                         doctest::Contains("step 2"), NumericError);

    InferenceTrace trace;
    ode_sample(oracle, eps, 4, Tensor{}, dummy, &trace);
    REQUIRE(trace.pred_clean.size() == 4);
    for (const Tensor& zhat : trace.pred_clean) CHECK(max_abs_diff(zhat, z0) <= 1e-5);
}

TEST_CASE("sdedit_degrade: identity at alpha 0, oracle inversion, monotone divergence") {
    Rng lrng(5, 0);
    Latent c0 = random_latent(lrng, 1, 2, 2);
    ContractiveToyVelocity toy;

    Rng r0(9, 1);
    Latent same = sdedit_degrade(toy, c0, 0.0, 8, r0);
    CHECK(bitwise_equal(same.data, c0.data));
    CHECK(r0.counter() == 0);  // alpha = 0 consumes no randomness

    // an oracle built from the same (c0, eps) undoes its own corruption
    for (double alpha : {0.3, 0.4, 1.0}) {
        for (int steps : {1, 7}) {
            Rng peek(77, 3);
            Tensor eps = randn(peek, c0.data.shape);
            OracleLinearVelocity oracle(c0.data, eps);
            Rng run(77, 3);
            Latent back = sdedit_degrade(oracle, c0, alpha, steps, run);
            CHECK(max_abs_diff(back.data, c0.data) <= 1e-5);
        }
    }

    // contractive field: corruption grows with alpha (averaged over seeds)
    std::vector<double> divergence;
    for (int ai = 1; ai <= 9; ++ai) {
        const double alpha = ai / 10.0;
        double acc = 0.0;
        for (int seed = 0; seed < 32; ++seed) {
            Rng r(1000 + seed, 0);
            Latent out = sdedit_degrade(toy, c0, alpha, 5, r);
            acc += mse(out.data, c0.data);
        }
        divergence.push_back(acc / 32.0);
    }
    for (size_t i = 0; i + 1 < divergence.size(); ++i)
        CHECK(divergence[i + 1] >= divergence[i] - 1e-9);

    CHECK_THROWS_WITH_AS(sdedit_degrade(toy, c0, 1.5, 5, r0), doctest::Contains("[0, 1]"),
                         ValidationError);
}

TEST_CASE("uniform timestep draws are uniform across deciles") {
    Rng rng(6, 0);
    int counts[10] = {0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double t = sample_timestep_uniform(rng);
        CHECK(t >= 0.0);
        CHECK(t < 1.0);
        counts[static_cast<int>(t * 10.0)]++;
    }
    for (int d = 0; d < 10; ++d) {
        const double freq = static_cast<double>(counts[d]) / n;
        CHECK(freq >= 0.09);
        CHECK(freq <= 0.11);
    }
}

TEST_CASE("binned timestep sampling respects the distribution") {
    Rng rng(7, 0);

    TimestepDistribution point;
    point.edges = {0.4, 0.42};
    point.probs = {1.0};
    for (int i = 0; i < 500; ++i) {
        const double t = sample_timestep(point, rng);
        CHECK(t >= 0.4);
        CHECK(t < 0.42);
    }

    TimestepDistribution split;
    split.edges = {0.0, 0.25, 0.5, 1.0};
    split.probs = {0.5, 0.0, 0.5};
    int low = 0, high = 0;
    for (int i = 0; i < 20000; ++i) {
        const double t = sample_timestep(split, rng);
        CHECK((t < 0.25 || t >= 0.5));
        (t < 0.25 ? low : high)++;
    }
    CHECK(std::abs(low - high) <= 20000 / 10);

    TimestepDistribution bad = point;
    bad.probs = {0.7};
    CHECK_THROWS_WITH_AS(sample_timestep(bad, rng), doctest::Contains("sum to 1"),
                         ValidationError);
    bad.probs = {-0.2};
    CHECK_THROWS_WITH_AS(sample_timestep(bad, rng), doctest::Contains("non-negative"),
                         ValidationError);
    bad.edges = {0.5, 0.4};
    bad.probs = {1.0};
    CHECK_THROWS_WITH_AS(sample_timestep(bad, rng), doctest::Contains("ascending"),
                         ValidationError);
}

TEST_CASE("build_detail_aware_sampler weights the steps that add detail") {
    // Clean-signal predictions whose only content is one high-frequency DCT
    // basis with amplitude amp[i]; all change happens in the first 5 steps.
    const int s = 10;
    const double amp[s] = {0, 1, 2, 3, 4, 5, 5, 5, 5, 5};
    InferenceTrace trace;
    for (int i = 0; i < s; ++i) {
        Tensor coef({8, 8});
        coef.at(7, 7) = static_cast<float>(amp[i]);
        Tensor plane = idct2d(coef);
        Tensor z({1, 2, 8, 8});
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) z.at(0, c, y, x) = plane.at(y, x);
        trace.pred_clean.push_back(z);
    }

    TimestepDistribution dist = build_detail_aware_sampler({trace}, 0.5);
    REQUIRE(dist.probs.size() == s - 1);
    REQUIRE(dist.edges.size() == s);
    CHECK(dist.edges.front() == doctest::Approx(0.1));
    CHECK(dist.edges.back() == doctest::Approx(1.0));
    double total = 0.0, early_mass = 0.0;
    for (size_t j = 0; j < dist.probs.size(); ++j) {
        total += dist.probs[j];
        if (dist.edges[j] >= 0.5 - 1e-9) early_mass += dist.probs[j];
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
    CHECK(early_mass >= 0.99);  // the first half of the steps is t in [0.5, 1]

    // averaging a trace with itself changes nothing
    TimestepDistribution two = build_detail_aware_sampler({trace, trace}, 0.5);
    for (size_t j = 0; j < dist.probs.size(); ++j)
        CHECK(std::abs(two.probs[j] - dist.probs[j]) <= 1e-12);

    // a flat trace has nothing to weight
    InferenceTrace flat;
    for (int i = 0; i < 3; ++i) flat.pred_clean.push_back(Tensor({1, 1, 4, 4}, 0.25f));
    CHECK_THROWS_WITH_AS(build_detail_aware_sampler({flat}, 0.5),
                         doctest::Contains("degenerate trace"), ValidationError);

    InferenceTrace stub;
    stub.pred_clean.push_back(Tensor({1, 1, 4, 4}));
    CHECK_THROWS_WITH_AS(build_detail_aware_sampler({stub}, 0.5),
                         doctest::Contains("at least 2 steps"), ValidationError);
}

TEST_CASE("timestep distribution round trips through CSV and plots as SVG") {
    auto dir = scratch_dir("flow_match");
    TimestepDistribution dist;
    dist.edges = {0.2, 0.4, 0.6, 0.8};
    dist.probs = {0.25, 0.5, 0.25};

    const std::string csv = (dir / "dist.csv").string();
    write_timestep_csv(dist, csv);
    CsvTable table = read_report(csv);
    REQUIRE(table.columns == std::vector<std::string>{"bin_lo", "bin_hi", "probability"});
    REQUIRE(table.rows.size() == 3);
    CHECK(std::stod(table.rows[0][0]) == doctest::Approx(0.2));
    CHECK(std::stod(table.rows[0][1]) == doctest::Approx(0.4));
    CHECK(std::stod(table.rows[1][2]) == doctest::Approx(0.5));

    const std::string svg = (dir / "dist.svg").string();
    write_weight_curve_svg(dist, svg);
    std::ifstream in(svg);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
}

TEST_CASE("apply_noise_augmentation draws in range and maps to timesteps") {
    Rng lrng(8, 0);
    Latent c = random_latent(lrng, 1, 4, 4);

    Rng r0(11, 0);
    auto [same, aug0] = apply_noise_augmentation(c, 0.0, 0.0, r0);
    CHECK(aug0.level == 0.0);
    CHECK(bitwise_equal(same.data, c.data));

    Rng r1(12, 0);
    for (int i = 0; i < 200; ++i) {
        auto [out, aug] = apply_noise_augmentation(c, 0.3, 0.6, r1);
        CHECK(aug.level >= 0.3);
        CHECK(aug.level <= 0.6);
        CHECK(aug.timestep() >= 300);
        CHECK(aug.timestep() <= 600);
        CHECK(out.data.all_finite());
    }

    // zero condition: the augmented latent is a*eps, so its variance is a^2
    Latent zero;
    zero.data = Tensor({1, zero.codec.cl(), 4, 4});
    Rng r2(13, 0);
    auto [noisy, aug] = apply_noise_augmentation(zero, 0.3, 0.6, r2);
    double m = 0.0;
    for (float v : noisy.data.data) m += v;
    m /= static_cast<double>(noisy.data.numel());
    double var = 0.0;
    for (float v : noisy.data.data) var += (v - m) * (v - m);
    var /= static_cast<double>(noisy.data.numel());
    const double expect = aug.level * aug.level;
    CHECK(std::abs(var - expect) <= 0.05 * expect);

    CHECK_THROWS_WITH_AS(apply_noise_augmentation(c, 0.6, 0.3, r2),
                         doctest::Contains("lo <= hi"), ValidationError);

    NoiseAugmentation mid;
    mid.level = 0.45;
    CHECK(mid.timestep() == 450);
}
