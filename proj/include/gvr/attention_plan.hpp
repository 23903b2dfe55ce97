// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gvr/tensor.hpp"

namespace gvr {

// One attention group: the listed query tokens attend jointly to the listed
// key/value tokens. Softmax is normalized over the whole kv list.
struct AttentionGroup {
    std::vector<int> q_idx;
    std::vector<int> kv_idx;
};

// The q_idx lists of all groups must partition [0, N) -- every token's output
// row is produced by exactly one group. kv lists may overlap freely.
struct AttentionPlan {
    std::vector<AttentionGroup> groups;

    void validate(int n_tokens) const;
};

// Captures what the backward pass (or an instrumented check) needs.
struct AttendCapture {
    // Per group: softmax probabilities, shape (heads, nq, nk).
    std::vector<Tensor> group_probs;
    // When set, every softmax row sum is appended (row-stochastic check).
    std::vector<double>* row_sums = nullptr;
};

// Multi-head scaled dot-product attention over a plan. q/k/v are (N, D) with
// D divisible by heads. Returns (N, D).
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
              const AttentionPlan& plan, AttendCapture* capture = nullptr);

// Gradients given the captured probabilities. Accumulates into dq/dk/dv
// (which must be zero-initialized (N, D) tensors).
void attend_backward(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                     const AttentionPlan& plan, const AttendCapture& capture,
                     const Tensor& grad_out, Tensor& dq, Tensor& dk, Tensor& dv);

}  // namespace gvr
