// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/tensor.hpp"

#include <cmath>
#include <sstream>

namespace gvr {

int64_t numel_of(const Shape& shape) {
    check(!shape.empty(), "tensor shape must have at least one extent");
    int64_t n = 1;
    for (int e : shape) {
        check(e >= 1, "tensor extents must be >= 1, got " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
    check(numel_of(shape) == static_cast<int64_t>(data.size()),
          "tensor data length does not match shape " + shape_str(shape));
}

int Tensor::dim(int i) const {
    check(i >= 0 && i < ndim(), "dimension index out of range");
    return shape[static_cast<size_t>(i)];
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

static void check_same(const Tensor& a, const Tensor& b, const char* op) {
    check(same_shape(a.shape, b.shape), std::string(op) + ": shape mismatch " +
                                            shape_str(a.shape) + " vs " + shape_str(b.shape));
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same(a, b, "sub");
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same(a, b, "mul");
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * s;
    return out;
}

Tensor add_scaled(const Tensor& a, const Tensor& b, float s) {
    check_same(a, b, "add_scaled");
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + s * b.data[i];
    return out;
}

Tensor lerp(const Tensor& a, const Tensor& b, float t) {
    check_same(a, b, "lerp");
    Tensor out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = (1.0f - t) * a.data[i] + t * b.data[i];
    return out;
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (float v : a.data) s += v;
    return s;
}

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.numel()); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (float v : a.data) m = std::max(m, static_cast<double>(std::fabs(v)));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, static_cast<double>(std::fabs(a.data[i] - b.data[i])));
    return m;
}

double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (float v : a.data) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

double mse(const Tensor& a, const Tensor& b) {
    check_same(a, b, "mse");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

Tensor randn(Rng& rng, const Shape& shape) {
    Tensor out(shape);
    // Entry i uses words (base + 2i, base + 2i + 1); independent of any
    // parallel evaluation order.
    uint64_t base = rng.counter();
    for (int64_t i = 0; i < out.numel(); ++i) {
        double u1 = 1.0 - (rng.word_at(base + 2 * static_cast<uint64_t>(i)) >> 11) * 0x1.0p-53;
        double u2 = (rng.word_at(base + 2 * static_cast<uint64_t>(i) + 1) >> 11) * 0x1.0p-53;
        out.data[static_cast<size_t>(i)] = static_cast<float>(
            std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2));
    }
    rng.skip(2 * static_cast<uint64_t>(out.numel()));
    return out;
}

Tensor rand_uniform(Rng& rng, const Shape& shape, float lo, float hi) {
    Tensor out(shape);
    uint64_t base = rng.counter();
    for (int64_t i = 0; i < out.numel(); ++i) {
        double u = (rng.word_at(base + static_cast<uint64_t>(i)) >> 11) * 0x1.0p-53;
        out.data[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<float>(u);
    }
    rng.skip(static_cast<uint64_t>(out.numel()));
    return out;
}

}  // namespace gvr
