// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <vector>

#include "gvr/attention_plan.hpp"
#include "gvr/tensor.hpp"

namespace gvr {

// Reverse-mode tape. Records primitive ops during the forward pass; backward()
// walks the nodes once in reverse creation order (creation order is already
// topological: an op's parents always precede it). One training step records
// on one tape; tapes are not shared across threads.
//
// Covered primitive set: what the upsampler network needs -- linear/matmul,
// 3D convolution, bilinear resize, layer norm, SiLU, grouped attention,
// concat/slice/permute/reshape plumbing, and scalar reductions.
class GradTape {
  public:
    using NodeId = int;

    NodeId leaf(Tensor value, bool requires_grad = false);
    NodeId param(Tensor value) { return leaf(std::move(value), true); }

    const Tensor& val(NodeId id) const;
    // Valid after backward(); zero tensor if the node was never reached.
    const Tensor& grad(NodeId id) const;

    // -- elementwise ------------------------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, float s);
    NodeId silu(NodeId a);

    // -- linear algebra ---------------------------------------------------
    NodeId matmul(NodeId a, NodeId b);                 // (n,k) x (k,m)
    NodeId linear(NodeId x, NodeId w, NodeId b = -1);  // x(n,din) w(dout,din) b(dout)

    // -- structured -------------------------------------------------------
    // x (Cin,T,H,W), w (Cout,Cin,kt,kh,kw) odd extents, stride 1, same pad.
    NodeId conv3d_same(NodeId x, NodeId w, NodeId b = -1);
    // Resize the last two dims (align-corners-false bilinear), any rank >= 2.
    NodeId bilinear_last2(NodeId x, int new_h, int new_w);
    NodeId permute4(NodeId x, const std::array<int, 4>& order);
    NodeId reshape(NodeId x, Shape shape);
    NodeId concat_cols(NodeId a, NodeId b);          // (n,da)+(n,db)
    NodeId slice_cols(NodeId x, int lo, int hi);     // (n,d) -> (n,hi-lo)
    NodeId layer_norm_rows(NodeId x, NodeId gamma, NodeId beta, float eps = 1e-5f);
    NodeId row_affine(NodeId x, NodeId scale_vec, NodeId shift_vec);  // x*(1+s)+t rowwise
    NodeId attention(NodeId q, NodeId k, NodeId v, int heads, AttentionPlan plan);

    // -- reductions -------------------------------------------------------
    NodeId sum_all(NodeId x);
    NodeId mean_all(NodeId x);
    // mean((x - target)^2); target is a constant.
    NodeId mse_to(NodeId x, Tensor target);

    // Seeds the loss adjoint with 1 and accumulates adjoints for every node
    // reachable from it. loss must be scalar.
    void backward(NodeId loss);

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        std::vector<NodeId> parents;
        bool requires_grad = false;
        // Receives this node's adjoint; accumulates into parents' adjoints.
        std::function<void(GradTape&, NodeId)> backward_fn;
    };

    NodeId push(Tensor value, std::vector<NodeId> parents,
                std::function<void(GradTape&, NodeId)> backward_fn);
    Tensor& adjoint(NodeId id);
    bool wants_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    std::vector<Node> nodes_;
    std::vector<Tensor> adjoints_;
    Tensor zero_;
};

// 4-accumulator float dot product; the hot inner kernel shared by tape ops.
float dotf(const float* a, const float* b, int n);
// y += a * x
void axpyf(float* y, const float* x, float a, int n);

}  // namespace gvr
