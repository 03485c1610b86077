/*
 * Copyright (c) 2026, The Any2Any Authors.  All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Tape-free reverse-mode differentiation over dense tensors. Each op result
// keeps shared pointers to its inputs plus a closure that pushes its
// gradient back to them; backward() walks the graph in reverse topological
// order. Instantiated for float (training) and double (gradient checks).

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "a2a/kernels.hpp"
#include "a2a/tensor.hpp"

namespace a2a::ag {

template <typename T>
struct Node {
    Tensor<T> value;
    std::vector<T> grad;  // empty until a gradient reaches the node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    std::vector<T>& grad_buffer()
    {
        if (grad.empty()) {
            grad.assign(value.numel(), T(0));
        }
        return grad;
    }
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    /// Graph leaf. Parameters are leaves with requires_grad set.
    static Var leaf(Tensor<T> value, bool requires_grad = false)
    {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    /// Gradient accumulated by backward(); empty when none reached this node.
    std::span<const T> grad() const { return node_->grad; }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }
    void clear_grad() { node_->grad.clear(); }

    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Disables graph construction in its scope (inference, frozen encoders).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Back-propagates from a scalar (one-element) result.
template <typename T>
void backward(const Var<T>& loss);

// Elementwise
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> silu(const Var<T>& a);
/// tanh-approximated GELU.
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
/// Zero gradient outside [lo, hi].
template <typename T> Var<T> clamp(const Var<T>& a, T lo, T hi);
/// Cuts the graph: same value, no inputs.
template <typename T> Var<T> detach(const Var<T>& a);
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);

/// a[B, ...] + b[...] broadcast over the leading dimension.
template <typename T> Var<T> add_broadcast(const Var<T>& a, const Var<T>& b);

/// x[..., in] W[in, out] + bias[out]; bias may be undefined.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

/// out[i] = x[index[i]] with the given result shape.
template <typename T>
Var<T> gather(const Var<T>& x, std::shared_ptr<const std::vector<int>> index, Shape shape);

/// Columns [offset, offset + len) of x viewed as [rows, last].
template <typename T> Var<T> slice_last(const Var<T>& x, int offset, int len);

/// Channel slice [c0, c1) of an NCHW tensor.
template <typename T> Var<T> slice_channels(const Var<T>& x, int c0, int c1);
template <typename T> Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// Normalizes the last dimension to zero mean and unit variance (no affine).
template <typename T> Var<T> layer_norm(const Var<T>& x, T eps);

/// x[B, N, d] * (1 + scale[B, d]) + shift[B, d].
template <typename T>
Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale);

/// x[B, N, d] + gate[B, d] * y[B, N, d].
template <typename T>
Var<T> gated_add(const Var<T>& x, const Var<T>& gate, const Var<T>& y);

/// Multi-head self-attention over qkv[B, N, 3d] -> [B, N, d].
template <typename T> Var<T> attention(const Var<T>& qkv, int heads);

/// NCHW convolution with weight [Co, Ci*k*k] and bias [Co] (bias optional).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int kernel, int stride,
              int pad);

template <typename T> Var<T> upsample2x(const Var<T>& x);
template <typename T> Var<T> avg_pool2x(const Var<T>& x);

/// Forward differences along width (dx) or height (dy) of an NCHW tensor.
template <typename T> Var<T> diff_x(const Var<T>& x);
template <typename T> Var<T> diff_y(const Var<T>& x);

// Scalar reductions (result shape {1}).
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);
/// Mean over elements of 0.5 (mu^2 + exp(logvar) - 1 - logvar).
template <typename T> Var<T> kl_std_normal(const Var<T>& mu, const Var<T>& logvar);

}  // namespace a2a::ag
