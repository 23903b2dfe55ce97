// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gvr/parallel.hpp"
#include "gvr/signal.hpp"

namespace gvr {

float dotf(const float* a, const float* b, int n) {
    float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

void axpyf(float* y, const float* x, float a, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

GradTape::NodeId GradTape::push(Tensor value, std::vector<NodeId> parents,
                                std::function<void(GradTape&, NodeId)> backward_fn) {
    NodeId id = static_cast<NodeId>(nodes_.size());
    bool rg = false;
    for (NodeId p : parents) {
        check_runtime(p >= 0 && p < id, "tape: parent node id out of order (cycle?)");
        rg = rg || nodes_[static_cast<size_t>(p)].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::move(parents), rg, std::move(backward_fn)});
    return id;
}

GradTape::NodeId GradTape::leaf(Tensor value, bool requires_grad) {
    NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr});
    return id;
}

const Tensor& GradTape::val(NodeId id) const {
    check_runtime(id >= 0 && id < static_cast<NodeId>(nodes_.size()), "tape: bad node id");
    return nodes_[static_cast<size_t>(id)].value;
}

const Tensor& GradTape::grad(NodeId id) const {
    check_runtime(id >= 0 && id < static_cast<NodeId>(nodes_.size()), "tape: bad node id");
    if (static_cast<size_t>(id) < adjoints_.size() && !adjoints_[static_cast<size_t>(id)].data.empty())
        return adjoints_[static_cast<size_t>(id)];
    const_cast<GradTape*>(this)->zero_ = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape);
    return zero_;
}

Tensor& GradTape::adjoint(NodeId id) {
    auto& a = adjoints_[static_cast<size_t>(id)];
    if (a.data.empty()) a = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape);
    return a;
}

void GradTape::backward(NodeId loss) {
    check(val(loss).numel() == 1, "tape: backward needs a scalar loss node");
    adjoints_.assign(nodes_.size(), Tensor{});
    adjoint(loss).data[0] = 1.0f;
    for (NodeId id = loss; id >= 0; --id) {
        auto& node = nodes_[static_cast<size_t>(id)];
        if (!node.backward_fn || !node.requires_grad) continue;
        if (adjoints_[static_cast<size_t>(id)].data.empty()) continue;  // unreachable from loss
        node.backward_fn(*this, id);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

GradTape::NodeId GradTape::add(NodeId a, NodeId b) {
    Tensor out = gvr::add(val(a), val(b));
    return push(std::move(out), {a, b}, [a, b](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        if (t.wants_grad(a)) {
            Tensor& da = t.adjoint(a);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
        }
        if (t.wants_grad(b)) {
            Tensor& db = t.adjoint(b);
            for (size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i];
        }
    });
}

GradTape::NodeId GradTape::sub(NodeId a, NodeId b) {
    Tensor out = gvr::sub(val(a), val(b));
    return push(std::move(out), {a, b}, [a, b](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        if (t.wants_grad(a)) {
            Tensor& da = t.adjoint(a);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
        }
        if (t.wants_grad(b)) {
            Tensor& db = t.adjoint(b);
            for (size_t i = 0; i < g.data.size(); ++i) db.data[i] -= g.data[i];
        }
    });
}

GradTape::NodeId GradTape::mul(NodeId a, NodeId b) {
    Tensor out = gvr::mul(val(a), val(b));
    return push(std::move(out), {a, b}, [a, b](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        if (t.wants_grad(a)) {
            Tensor& da = t.adjoint(a);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * vb.data[i];
        }
        if (t.wants_grad(b)) {
            Tensor& db = t.adjoint(b);
            for (size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i] * va.data[i];
        }
    });
}

GradTape::NodeId GradTape::scale(NodeId a, float s) {
    Tensor out = gvr::scale(val(a), s);
    return push(std::move(out), {a}, [a, s](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        if (!t.wants_grad(a)) return;
        Tensor& da = t.adjoint(a);
        for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += s * g.data[i];
    });
}

GradTape::NodeId GradTape::silu(NodeId a) {
    const Tensor& x = val(a);
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        float s = 1.0f / (1.0f + std::exp(-x.data[i]));
        out.data[i] = x.data[i] * s;
    }
    return push(std::move(out), {a}, [a](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        if (!t.wants_grad(a)) return;
        const Tensor& x = t.val(a);
        Tensor& da = t.adjoint(a);
        for (size_t i = 0; i < g.data.size(); ++i) {
            float s = 1.0f / (1.0f + std::exp(-x.data[i]));
            da.data[i] += g.data[i] * s * (1.0f + x.data[i] * (1.0f - s));
        }
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

GradTape::NodeId GradTape::matmul(NodeId a, NodeId b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    check(va.ndim() == 2 && vb.ndim() == 2 && va.dim(1) == vb.dim(0),
          "matmul: incompatible shapes " + shape_str(va.shape) + " x " + shape_str(vb.shape));
    int n = va.dim(0), k = va.dim(1), m = vb.dim(1);
    Tensor out(Shape{n, m});
    parallel_for(n, [&](int64_t i) {
        float* orow = out.ptr() + i * m;
        const float* arow = va.ptr() + i * k;
        for (int kk = 0; kk < k; ++kk) axpyf(orow, vb.ptr() + static_cast<int64_t>(kk) * m, arow[kk], m);
    });
    return push(std::move(out), {a, b}, [a, b, n, k, m](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        if (t.wants_grad(a)) {
            Tensor& da = t.adjoint(a);
            parallel_for(n, [&](int64_t i) {
                for (int kk = 0; kk < k; ++kk)
                    da.ptr()[i * k + kk] +=
                        dotf(g.ptr() + i * m, vb.ptr() + static_cast<int64_t>(kk) * m, m);
            });
        }
        if (t.wants_grad(b)) {
            Tensor& db = t.adjoint(b);
            for (int i = 0; i < n; ++i) {
                const float* arow = va.ptr() + static_cast<int64_t>(i) * k;
                const float* grow = g.ptr() + static_cast<int64_t>(i) * m;
                for (int kk = 0; kk < k; ++kk)
                    axpyf(db.ptr() + static_cast<int64_t>(kk) * m, grow, arow[kk], m);
            }
        }
    });
}

GradTape::NodeId GradTape::linear(NodeId x, NodeId w, NodeId b) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    check(vx.ndim() == 2 && vw.ndim() == 2 && vx.dim(1) == vw.dim(1),
          "linear: shape mismatch x" + shape_str(vx.shape) + " w" + shape_str(vw.shape));
    int n = vx.dim(0), din = vx.dim(1), dout = vw.dim(0);
    const Tensor* vb = b >= 0 ? &val(b) : nullptr;
    if (vb) check(vb->numel() == dout, "linear: bias length mismatch");
    Tensor out(Shape{n, dout});
    parallel_for(n, [&](int64_t i) {
        const float* xrow = vx.ptr() + i * din;
        float* orow = out.ptr() + i * dout;
        for (int oc = 0; oc < dout; ++oc) {
            float v = dotf(xrow, vw.ptr() + static_cast<int64_t>(oc) * din, din);
            orow[oc] = vb ? v + vb->data[static_cast<size_t>(oc)] : v;
        }
    });
    std::vector<NodeId> parents = b >= 0 ? std::vector<NodeId>{x, w, b} : std::vector<NodeId>{x, w};
    return push(std::move(out), std::move(parents),
                [x, w, b, n, din, dout](GradTape& t, NodeId id) {
                    const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
                    const Tensor& vx = t.val(x);
                    const Tensor& vw = t.val(w);
                    if (t.wants_grad(x)) {
                        Tensor& dx = t.adjoint(x);
                        parallel_for(n, [&](int64_t i) {
                            const float* grow = g.ptr() + i * dout;
                            float* dxrow = dx.ptr() + i * din;
                            for (int oc = 0; oc < dout; ++oc)
                                axpyf(dxrow, vw.ptr() + static_cast<int64_t>(oc) * din, grow[oc], din);
                        });
                    }
                    if (t.wants_grad(w)) {
                        Tensor& dw = t.adjoint(w);
                        parallel_for(dout, [&](int64_t oc) {
                            float* dwrow = dw.ptr() + oc * din;
                            for (int i = 0; i < n; ++i)
                                axpyf(dwrow, vx.ptr() + static_cast<int64_t>(i) * din,
                                      g.ptr()[static_cast<int64_t>(i) * dout + oc], din);
                        });
                    }
                    if (b >= 0 && t.wants_grad(b)) {
                        Tensor& db = t.adjoint(b);
                        for (int i = 0; i < n; ++i)
                            for (int oc = 0; oc < dout; ++oc)
                                db.data[static_cast<size_t>(oc)] +=
                                    g.ptr()[static_cast<int64_t>(i) * dout + oc];
                    }
                });
}

// ---------------------------------------------------------------------------
// conv3d via im2col
// ---------------------------------------------------------------------------

namespace {

struct Conv3dGeom {
    int cin, t, h, w;
    int cout, kt, kh, kw;
    int64_t m;  // out positions
    int64_t k;  // cin*kt*kh*kw
};

// col (m, k) row-major; zero padding.
void im2col3d(const Tensor& x, const Conv3dGeom& g, std::vector<float>& col) {
    col.assign(static_cast<size_t>(g.m * g.k), 0.0f);
    int pt = g.kt / 2, ph = g.kh / 2, pw = g.kw / 2;
    parallel_for(g.m, [&](int64_t m) {
        int ox = static_cast<int>(m % g.w);
        int oy = static_cast<int>((m / g.w) % g.h);
        int oz = static_cast<int>(m / (static_cast<int64_t>(g.w) * g.h));
        float* row = col.data() + m * g.k;
        int64_t idx = 0;
        for (int ic = 0; ic < g.cin; ++ic)
            for (int kz = 0; kz < g.kt; ++kz) {
                int iz = oz - pt + kz;
                for (int ky = 0; ky < g.kh; ++ky) {
                    int iy = oy - ph + ky;
                    if (iz < 0 || iz >= g.t || iy < 0 || iy >= g.h) {
                        idx += g.kw;
                        continue;
                    }
                    const float* src =
                        x.ptr() + ((static_cast<int64_t>(ic) * g.t + iz) * g.h + iy) * g.w;
                    for (int kx = 0; kx < g.kw; ++kx) {
                        int ix = ox - pw + kx;
                        if (ix >= 0 && ix < g.w) row[idx] = src[ix];
                        ++idx;
                    }
                }
            }
    });
}

}  // namespace

GradTape::NodeId GradTape::conv3d_same(NodeId x, NodeId w, NodeId b) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    check(vx.ndim() == 4, "conv3d: input must be Cin x T x H x W");
    check(vw.ndim() == 5, "conv3d: kernel must be Cout x Cin x kt x kh x kw");
    check(vx.dim(0) == vw.dim(1), "conv3d: channel mismatch");
    check(vw.dim(2) % 2 == 1 && vw.dim(3) % 2 == 1 && vw.dim(4) % 2 == 1,
          "conv3d: same-padding needs odd kernel extents");
    Conv3dGeom geo{vx.dim(0), vx.dim(1), vx.dim(2), vx.dim(3),
                   vw.dim(0), vw.dim(2), vw.dim(3), vw.dim(4), 0, 0};
    geo.m = static_cast<int64_t>(geo.t) * geo.h * geo.w;
    geo.k = static_cast<int64_t>(geo.cin) * geo.kt * geo.kh * geo.kw;
    const Tensor* vb = b >= 0 ? &val(b) : nullptr;
    if (vb) check(vb->numel() == geo.cout, "conv3d: bias length mismatch");

    auto col = std::make_shared<std::vector<float>>();
    im2col3d(vx, geo, *col);

    Tensor out(Shape{geo.cout, geo.t, geo.h, geo.w});
    parallel_for(geo.m, [&](int64_t m) {
        const float* crow = col->data() + m * geo.k;
        for (int oc = 0; oc < geo.cout; ++oc) {
            float v = dotf(crow, vw.ptr() + static_cast<int64_t>(oc) * geo.k,
                           static_cast<int>(geo.k));
            if (vb) v += vb->data[static_cast<size_t>(oc)];
            out.ptr()[static_cast<int64_t>(oc) * geo.m + m] = v;
        }
    });

    std::vector<NodeId> parents = b >= 0 ? std::vector<NodeId>{x, w, b} : std::vector<NodeId>{x, w};
    return push(std::move(out), std::move(parents), [x, w, b, geo, col](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];  // (cout, t, h, w)
        const Tensor& vw = t.val(w);
        if (t.wants_grad(w)) {
            Tensor& dw = t.adjoint(w);
            parallel_for(geo.cout, [&](int64_t oc) {
                float* dwrow = dw.ptr() + oc * geo.k;
                const float* grow = g.ptr() + oc * geo.m;
                for (int64_t m = 0; m < geo.m; ++m)
                    axpyf(dwrow, col->data() + m * geo.k, grow[m], static_cast<int>(geo.k));
            });
        }
        if (b >= 0 && t.wants_grad(b)) {
            Tensor& db = t.adjoint(b);
            for (int oc = 0; oc < geo.cout; ++oc) {
                double acc = 0.0;
                const float* grow = g.ptr() + static_cast<int64_t>(oc) * geo.m;
                for (int64_t m = 0; m < geo.m; ++m) acc += grow[m];
                db.data[static_cast<size_t>(oc)] += static_cast<float>(acc);
            }
        }
        if (t.wants_grad(x)) {
            // dcol = g^T W, then scatter back (col2im transpose).
            std::vector<float> dcol(static_cast<size_t>(geo.m * geo.k), 0.0f);
            parallel_for(geo.m, [&](int64_t m) {
                float* drow = dcol.data() + m * geo.k;
                for (int oc = 0; oc < geo.cout; ++oc)
                    axpyf(drow, vw.ptr() + static_cast<int64_t>(oc) * geo.k,
                          g.ptr()[static_cast<int64_t>(oc) * geo.m + m], static_cast<int>(geo.k));
            });
            Tensor& dx = t.adjoint(x);
            int pt = geo.kt / 2, ph = geo.kh / 2, pw = geo.kw / 2;
            for (int64_t m = 0; m < geo.m; ++m) {
                int ox = static_cast<int>(m % geo.w);
                int oy = static_cast<int>((m / geo.w) % geo.h);
                int oz = static_cast<int>(m / (static_cast<int64_t>(geo.w) * geo.h));
                const float* drow = dcol.data() + m * geo.k;
                int64_t idx = 0;
                for (int ic = 0; ic < geo.cin; ++ic)
                    for (int kz = 0; kz < geo.kt; ++kz) {
                        int iz = oz - pt + kz;
                        for (int ky = 0; ky < geo.kh; ++ky) {
                            int iy = oy - ph + ky;
                            if (iz < 0 || iz >= geo.t || iy < 0 || iy >= geo.h) {
                                idx += geo.kw;
                                continue;
                            }
                            float* dst = dx.ptr() +
                                         ((static_cast<int64_t>(ic) * geo.t + iz) * geo.h + iy) *
                                             geo.w;
                            for (int kx = 0; kx < geo.kw; ++kx) {
                                int ix = ox - pw + kx;
                                if (ix >= 0 && ix < geo.w) dst[ix] += drow[idx];
                                ++idx;
                            }
                        }
                    }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// structured
// ---------------------------------------------------------------------------

GradTape::NodeId GradTape::bilinear_last2(NodeId x, int new_h, int new_w) {
    const Tensor& vx = val(x);
    check(vx.ndim() >= 2, "bilinear: rank must be >= 2");
    check(new_h >= 1 && new_w >= 1, "bilinear: target extents must be >= 1");
    int h = vx.shape[vx.shape.size() - 2];
    int w = vx.shape.back();
    int64_t planes = vx.numel() / (static_cast<int64_t>(h) * w);
    Shape oshape = vx.shape;
    oshape[oshape.size() - 2] = new_h;
    oshape.back() = new_w;
    Tensor out(oshape);
    parallel_for(planes, [&](int64_t p) {
        bilinear_plane(vx.ptr() + p * h * w, h, w, out.ptr() + p * new_h * new_w, new_h, new_w);
    });
    return push(std::move(out), {x}, [x, h, w, new_h, new_w, planes](GradTape& t, NodeId id) {
        if (!t.wants_grad(x)) return;
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        Tensor& dx = t.adjoint(x);
        double sy = static_cast<double>(h) / new_h;
        double sx = static_cast<double>(w) / new_w;
        parallel_for(planes, [&](int64_t p) {
            const float* gp = g.ptr() + p * new_h * new_w;
            float* dp = dx.ptr() + p * h * w;
            for (int y = 0; y < new_h; ++y) {
                double fy = (y + 0.5) * sy - 0.5;
                int y0 = static_cast<int>(std::floor(fy));
                double wy = fy - y0;
                int y0c = std::clamp(y0, 0, h - 1);
                int y1c = std::clamp(y0 + 1, 0, h - 1);
                for (int xx = 0; xx < new_w; ++xx) {
                    double fx = (xx + 0.5) * sx - 0.5;
                    int x0 = static_cast<int>(std::floor(fx));
                    double wx = fx - x0;
                    int x0c = std::clamp(x0, 0, w - 1);
                    int x1c = std::clamp(x0 + 1, 0, w - 1);
                    float gv = gp[static_cast<int64_t>(y) * new_w + xx];
                    dp[static_cast<int64_t>(y0c) * w + x0c] +=
                        static_cast<float>((1 - wy) * (1 - wx)) * gv;
                    dp[static_cast<int64_t>(y0c) * w + x1c] += static_cast<float>((1 - wy) * wx) * gv;
                    dp[static_cast<int64_t>(y1c) * w + x0c] += static_cast<float>(wy * (1 - wx)) * gv;
                    dp[static_cast<int64_t>(y1c) * w + x1c] += static_cast<float>(wy * wx) * gv;
                }
            }
        });
    });
}

namespace {

Tensor permute4_apply(const Tensor& x, const std::array<int, 4>& order) {
    Shape os(4);
    for (int d = 0; d < 4; ++d) os[static_cast<size_t>(d)] = x.dim(order[static_cast<size_t>(d)]);
    Tensor out(os);
    int s1 = x.dim(1), s2 = x.dim(2), s3 = x.dim(3);
    int64_t strides[4] = {static_cast<int64_t>(s1) * s2 * s3, static_cast<int64_t>(s2) * s3, s3, 1};
    int64_t idx = 0;
    int in_idx[4];
    for (int a = 0; a < os[0]; ++a)
        for (int b = 0; b < os[1]; ++b)
            for (int c = 0; c < os[2]; ++c)
                for (int d = 0; d < os[3]; ++d) {
                    in_idx[order[0]] = a;
                    in_idx[order[1]] = b;
                    in_idx[order[2]] = c;
                    in_idx[order[3]] = d;
                    out.data[static_cast<size_t>(idx++)] =
                        x.data[static_cast<size_t>(in_idx[0] * strides[0] + in_idx[1] * strides[1] +
                                                   in_idx[2] * strides[2] + in_idx[3] * strides[3])];
                }
    return out;
}

}  // namespace

GradTape::NodeId GradTape::permute4(NodeId x, const std::array<int, 4>& order) {
    const Tensor& vx = val(x);
    check(vx.ndim() == 4, "permute4: rank-4 input required");
    Tensor out = permute4_apply(vx, order);
    return push(std::move(out), {x}, [x, order](GradTape& t, NodeId id) {
        if (!t.wants_grad(x)) return;
        std::array<int, 4> inv{};
        for (int d = 0; d < 4; ++d) inv[static_cast<size_t>(order[static_cast<size_t>(d)])] = d;
        Tensor gp = permute4_apply(t.adjoints_[static_cast<size_t>(id)], inv);
        Tensor& dx = t.adjoint(x);
        for (size_t i = 0; i < gp.data.size(); ++i) dx.data[i] += gp.data[i];
    });
}

GradTape::NodeId GradTape::reshape(NodeId x, Shape shape) {
    const Tensor& vx = val(x);
    check(numel_of(shape) == vx.numel(), "reshape: element count mismatch");
    Tensor out(shape, vx.data);
    return push(std::move(out), {x}, [x](GradTape& t, NodeId id) {
        if (!t.wants_grad(x)) return;
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        Tensor& dx = t.adjoint(x);
        for (size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
    });
}

GradTape::NodeId GradTape::concat_cols(NodeId a, NodeId b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    check(va.ndim() == 2 && vb.ndim() == 2 && va.dim(0) == vb.dim(0),
          "concat_cols: row counts must match");
    int n = va.dim(0), da = va.dim(1), db = vb.dim(1);
    Tensor out(Shape{n, da + db});
    for (int i = 0; i < n; ++i) {
        std::copy_n(va.ptr() + static_cast<int64_t>(i) * da, da,
                    out.ptr() + static_cast<int64_t>(i) * (da + db));
        std::copy_n(vb.ptr() + static_cast<int64_t>(i) * db, db,
                    out.ptr() + static_cast<int64_t>(i) * (da + db) + da);
    }
    return push(std::move(out), {a, b}, [a, b, n, da, db](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        if (t.wants_grad(a)) {
            Tensor& ga = t.adjoint(a);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < da; ++j)
                    ga.ptr()[static_cast<int64_t>(i) * da + j] +=
                        g.ptr()[static_cast<int64_t>(i) * (da + db) + j];
        }
        if (t.wants_grad(b)) {
            Tensor& gb = t.adjoint(b);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < db; ++j)
                    gb.ptr()[static_cast<int64_t>(i) * db + j] +=
                        g.ptr()[static_cast<int64_t>(i) * (da + db) + da + j];
        }
    });
}

GradTape::NodeId GradTape::slice_cols(NodeId x, int lo, int hi) {
    const Tensor& vx = val(x);
    check(vx.ndim() == 2 && lo >= 0 && hi <= vx.dim(1) && lo < hi, "slice_cols: bad range");
    int n = vx.dim(0), d = vx.dim(1), sd = hi - lo;
    Tensor out(Shape{n, sd});
    for (int i = 0; i < n; ++i)
        std::copy_n(vx.ptr() + static_cast<int64_t>(i) * d + lo, sd,
                    out.ptr() + static_cast<int64_t>(i) * sd);
    return push(std::move(out), {x}, [x, lo, n, d, sd](GradTape& t, NodeId id) {
        if (!t.wants_grad(x)) return;
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        Tensor& dx = t.adjoint(x);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < sd; ++j)
                dx.ptr()[static_cast<int64_t>(i) * d + lo + j] +=
                    g.ptr()[static_cast<int64_t>(i) * sd + j];
    });
}

GradTape::NodeId GradTape::layer_norm_rows(NodeId x, NodeId gamma, NodeId beta, float eps) {
    const Tensor& vx = val(x);
    check(vx.ndim() == 2, "layer_norm: x must be (n, d)");
    int n = vx.dim(0), d = vx.dim(1);
    check(val(gamma).numel() == d && val(beta).numel() == d, "layer_norm: gamma/beta length");
    auto mean_v = std::make_shared<std::vector<float>>(static_cast<size_t>(n));
    auto rstd_v = std::make_shared<std::vector<float>>(static_cast<size_t>(n));
    Tensor out(Shape{n, d});
    const Tensor& vg = val(gamma);
    const Tensor& vb = val(beta);
    for (int i = 0; i < n; ++i) {
        const float* row = vx.ptr() + static_cast<int64_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= d;
        float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
        (*mean_v)[static_cast<size_t>(i)] = static_cast<float>(mu);
        (*rstd_v)[static_cast<size_t>(i)] = rs;
        float* orow = out.ptr() + static_cast<int64_t>(i) * d;
        for (int j = 0; j < d; ++j)
            orow[j] = (row[j] - static_cast<float>(mu)) * rs * vg.data[static_cast<size_t>(j)] +
                      vb.data[static_cast<size_t>(j)];
    }
    return push(std::move(out), {x, gamma, beta},
                [x, gamma, beta, n, d, mean_v, rstd_v](GradTape& t, NodeId id) {
                    const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
                    const Tensor& vx = t.val(x);
                    const Tensor& vg = t.val(gamma);
                    bool wx = t.wants_grad(x), wg = t.wants_grad(gamma), wb = t.wants_grad(beta);
                    Tensor* dx = wx ? &t.adjoint(x) : nullptr;
                    Tensor* dg = wg ? &t.adjoint(gamma) : nullptr;
                    Tensor* db = wb ? &t.adjoint(beta) : nullptr;
                    for (int i = 0; i < n; ++i) {
                        const float* xrow = vx.ptr() + static_cast<int64_t>(i) * d;
                        const float* grow = g.ptr() + static_cast<int64_t>(i) * d;
                        float mu = (*mean_v)[static_cast<size_t>(i)];
                        float rs = (*rstd_v)[static_cast<size_t>(i)];
                        double m1 = 0.0, m2 = 0.0;
                        for (int j = 0; j < d; ++j) {
                            float xhat = (xrow[j] - mu) * rs;
                            float dxh = grow[j] * vg.data[static_cast<size_t>(j)];
                            m1 += dxh;
                            m2 += dxh * xhat;
                            if (dg) dg->data[static_cast<size_t>(j)] += grow[j] * xhat;
                            if (db) db->data[static_cast<size_t>(j)] += grow[j];
                        }
                        if (!dx) continue;
                        m1 /= d;
                        m2 /= d;
                        float* dxrow = dx->ptr() + static_cast<int64_t>(i) * d;
                        for (int j = 0; j < d; ++j) {
                            float xhat = (xrow[j] - mu) * rs;
                            float dxh = grow[j] * vg.data[static_cast<size_t>(j)];
                            dxrow[j] += rs * (dxh - static_cast<float>(m1) -
                                              xhat * static_cast<float>(m2));
                        }
                    }
                });
}

GradTape::NodeId GradTape::row_affine(NodeId x, NodeId scale_vec, NodeId shift_vec) {
    const Tensor& vx = val(x);
    check(vx.ndim() == 2, "row_affine: x must be (n, d)");
    int n = vx.dim(0), d = vx.dim(1);
    check(val(scale_vec).numel() == d && val(shift_vec).numel() == d,
          "row_affine: modulation vector length mismatch");
    const Tensor& vs = val(scale_vec);
    const Tensor& vt = val(shift_vec);
    Tensor out(Shape{n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out.ptr()[static_cast<int64_t>(i) * d + j] =
                vx.ptr()[static_cast<int64_t>(i) * d + j] * (1.0f + vs.data[static_cast<size_t>(j)]) +
                vt.data[static_cast<size_t>(j)];
    return push(std::move(out), {x, scale_vec, shift_vec},
                [x, scale_vec, shift_vec, n, d](GradTape& t, NodeId id) {
                    const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
                    const Tensor& vx = t.val(x);
                    const Tensor& vs = t.val(scale_vec);
                    if (t.wants_grad(x)) {
                        Tensor& dx = t.adjoint(x);
                        for (int i = 0; i < n; ++i)
                            for (int j = 0; j < d; ++j)
                                dx.ptr()[static_cast<int64_t>(i) * d + j] +=
                                    g.ptr()[static_cast<int64_t>(i) * d + j] *
                                    (1.0f + vs.data[static_cast<size_t>(j)]);
                    }
                    if (t.wants_grad(scale_vec)) {
                        Tensor& ds = t.adjoint(scale_vec);
                        for (int j = 0; j < d; ++j) {
                            double acc = 0.0;
                            for (int i = 0; i < n; ++i)
                                acc += static_cast<double>(g.ptr()[static_cast<int64_t>(i) * d + j]) *
                                       vx.ptr()[static_cast<int64_t>(i) * d + j];
                            ds.data[static_cast<size_t>(j)] += static_cast<float>(acc);
                        }
                    }
                    if (t.wants_grad(shift_vec)) {
                        Tensor& dt = t.adjoint(shift_vec);
                        for (int j = 0; j < d; ++j) {
                            double acc = 0.0;
                            for (int i = 0; i < n; ++i)
                                acc += g.ptr()[static_cast<int64_t>(i) * d + j];
                            dt.data[static_cast<size_t>(j)] += static_cast<float>(acc);
                        }
                    }
                });
}

GradTape::NodeId GradTape::attention(NodeId q, NodeId k, NodeId v, int heads, AttentionPlan plan) {
    const Tensor& vq = val(q);
    auto capture = std::make_shared<AttendCapture>();
    Tensor out = attend(vq, val(k), val(v), heads, plan, capture.get());
    auto plan_p = std::make_shared<AttentionPlan>(std::move(plan));
    return push(std::move(out), {q, k, v}, [q, k, v, heads, plan_p, capture](GradTape& t, NodeId id) {
        const Tensor& g = t.adjoints_[static_cast<size_t>(id)];
        Tensor& dq = t.adjoint(q);
        Tensor& dk = t.adjoint(k);
        Tensor& dv = t.adjoint(v);
        attend_backward(t.val(q), t.val(k), t.val(v), heads, *plan_p, *capture, g, dq, dk, dv);
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

GradTape::NodeId GradTape::sum_all(NodeId x) {
    double s = 0.0;
    for (float v : val(x).data) s += v;
    return push(Tensor::scalar(static_cast<float>(s)), {x}, [x](GradTape& t, NodeId id) {
        if (!t.wants_grad(x)) return;
        float g = t.adjoints_[static_cast<size_t>(id)].data[0];
        Tensor& dx = t.adjoint(x);
        for (auto& d : dx.data) d += g;
    });
}

GradTape::NodeId GradTape::mean_all(NodeId x) {
    double s = 0.0;
    for (float v : val(x).data) s += v;
    int64_t n = val(x).numel();
    return push(Tensor::scalar(static_cast<float>(s / static_cast<double>(n))), {x},
                [x, n](GradTape& t, NodeId id) {
                    if (!t.wants_grad(x)) return;
                    float g = t.adjoints_[static_cast<size_t>(id)].data[0] /
                              static_cast<float>(n);
                    Tensor& dx = t.adjoint(x);
                    for (auto& d : dx.data) d += g;
                });
}

GradTape::NodeId GradTape::mse_to(NodeId x, Tensor target) {
    const Tensor& vx = val(x);
    check(same_shape(vx.shape, target.shape), "mse_to: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < vx.data.size(); ++i) {
        double d = static_cast<double>(vx.data[i]) - target.data[i];
        s += d * d;
    }
    int64_t n = vx.numel();
    auto tgt = std::make_shared<Tensor>(std::move(target));
    return push(Tensor::scalar(static_cast<float>(s / static_cast<double>(n))), {x},
                [x, n, tgt](GradTape& t, NodeId id) {
                    if (!t.wants_grad(x)) return;
                    float g = t.adjoints_[static_cast<size_t>(id)].data[0];
                    const Tensor& vx = t.val(x);
                    Tensor& dx = t.adjoint(x);
                    float c = 2.0f * g / static_cast<float>(n);
                    for (size_t i = 0; i < vx.data.size(); ++i)
                        dx.data[i] += c * (vx.data[i] - tgt->data[i]);
                });
}

}  // namespace gvr
