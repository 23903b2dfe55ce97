// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "gvr/common.hpp"
#include "gvr/rng.hpp"

namespace gvr {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense row-major float32 tensor. Treated as a value type: ops return new
// tensors, shared tensors are never mutated in place.
struct Tensor {
    Shape shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), 0.0f) {}
    Tensor(Shape s, float fill)
        : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), fill) {}
    Tensor(Shape s, std::vector<float> values);

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, float v) { return Tensor(std::move(s), v); }
    static Tensor scalar(float v) { return Tensor(Shape{1}, std::vector<float>{v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const;

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 2D / 3D / 4D accessors; callers guarantee the rank.
    float& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    float at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    float& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                        shape[3] +
                    l];
    }
    float at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                        shape[3] +
                    l];
    }

    bool all_finite() const;
};

// Elementwise arithmetic (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scaled(const Tensor& a, const Tensor& b, float s);  // a + s*b
// (1-t)*a + t*b
Tensor lerp(const Tensor& a, const Tensor& b, float t);

double sum(const Tensor& a);
double mean(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
double mse(const Tensor& a, const Tensor& b);

// i.i.d. standard normal entries, deterministic in (seed, stream, counter).
// Advances rng by 2*numel words.
Tensor randn(Rng& rng, const Shape& shape);
Tensor rand_uniform(Rng& rng, const Shape& shape, float lo = 0.0f, float hi = 1.0f);

}  // namespace gvr
