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

#include "a2a/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace a2a::ag {

namespace {

thread_local bool t_grad_enabled = true;

namespace kn = a2a::kernels::omp;

template <typename T>
using NodeFn = std::function<void(Node<T>&)>;

template <typename T>
Var<T> make_op(Tensor<T> value, std::initializer_list<Var<T>> inputs, NodeFn<T> fn)
{
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    bool needs = false;
    if (t_grad_enabled) {
        for (const auto& v : inputs) {
            needs = needs || (v.defined() && v.requires_grad());
        }
    }
    if (needs) {
        n->requires_grad = true;
        for (const auto& v : inputs) {
            n->inputs.push_back(v.defined() ? v.node_ptr() : nullptr);
        }
        n->backward = std::move(fn);
    }
    return Var<T>(std::move(n));
}

/// Gradient buffer of input i, or null when that input takes no gradient.
template <typename T>
T* in_grad(Node<T>& self, std::size_t i)
{
    auto& in = self.inputs[i];
    if (!in || !in->requires_grad) {
        return nullptr;
    }
    return in->grad_buffer().data();
}

template <typename T>
const Tensor<T>& in_value(Node<T>& self, std::size_t i)
{
    return self.inputs[i]->value;
}

template <typename T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op)
{
    if (a.shape() != b.shape()) {
        fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    }
}

template <typename T>
Var<T> scalar_result(double v, std::initializer_list<Var<T>> inputs, NodeFn<T> fn)
{
    return make_op(Tensor<T>({1}, static_cast<T>(v)), inputs, std::move(fn));
}

/// Elementwise unary op with derivative expressed from (x, y).
template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& a, F f, D dfdx)
{
    Tensor<T> out(a.shape());
    const auto& x = a.value().data;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data[i] = f(x[i]);
    }
    return make_op<T>(std::move(out), {a}, [dfdx](Node<T>& self) {
        T* ga = in_grad(self, 0);
        if (ga == nullptr) return;
        const auto& x = in_value(self, 0).data;
        const auto& y = self.value.data;
        for (std::size_t i = 0; i < x.size(); ++i) {
            ga[i] += self.grad[i] * dfdx(x[i], y[i]);
        }
    });
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

template <typename T>
void backward(const Var<T>& loss)
{
    require(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar");
    if (!loss.requires_grad()) {
        return;
    }
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<T>* child = node->inputs[next++].get();
            if (child != nullptr && child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
    same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = a.value().data[i] + b.value().data[i];
    }
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (T* g = in_grad(self, k)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
    same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = a.value().data[i] - b.value().data[i];
    }
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (T* g = in_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
    same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = a.value().data[i] * b.value().data[i];
    }
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        const auto& av = in_value(self, 0).data;
        const auto& bv = in_value(self, 1).data;
        if (T* g = in_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (T* g = in_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s)
{
    return unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> silu(const Var<T>& a)
{
    return unary(
        a, [](T x) { return x / (T(1) + std::exp(-x)); },
        [](T x, T) {
            const T sg = T(1) / (T(1) + std::exp(-x));
            return sg * (T(1) + x * (T(1) - sg));
        });
}

template <typename T>
Var<T> gelu(const Var<T>& a)
{
    constexpr T c = T(0.7978845608028654);
    constexpr T k = T(0.044715);
    return unary(
        a, [](T x) { return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x))); },
        [](T x, T) {
            const T th = std::tanh(c * (x + k * x * x * x));
            return T(0.5) * (T(1) + th) +
                   T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3) * k * x * x);
        });
}

template <typename T>
Var<T> tanh(const Var<T>& a)
{
    return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> exp(const Var<T>& a)
{
    return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi)
{
    return unary(
        a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
        [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> detach(const Var<T>& a)
{
    return Var<T>::leaf(a.value(), false);
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape)
{
    require(shape_numel(shape) == a.numel(),
            "reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Tensor<T> out(std::move(shape), a.value().data);
    return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> add_broadcast(const Var<T>& a, const Var<T>& b)
{
    const std::size_t inner = b.numel();
    require(a.value().rank() >= 1 && a.numel() % inner == 0 &&
                Shape(a.shape().begin() + 1, a.shape().end()) == b.shape(),
            "add_broadcast: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    Tensor<T> out = a.value();
    const std::size_t items = a.numel() / inner;
    for (std::size_t r = 0; r < items; ++r) {
        for (std::size_t i = 0; i < inner; ++i) out.data[r * inner + i] += b.value().data[i];
    }
    return make_op<T>(std::move(out), {a, b}, [items, inner](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (T* g = in_grad(self, 1)) {
            for (std::size_t r = 0; r < items; ++r) {
                for (std::size_t i = 0; i < inner; ++i) g[i] += self.grad[r * inner + i];
            }
        }
    });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias)
{
    require(w.value().rank() == 2, "linear: weight must be rank 2");
    const int in = w.value().dim(0);
    const int out_f = w.value().dim(1);
    require(x.value().rank() >= 1 && x.value().dim(-1) == in,
            "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    if (bias.defined()) {
        require(bias.numel() == static_cast<std::size_t>(out_f), "linear: bias size");
    }
    const int rows = static_cast<int>(x.numel() / in);
    Shape shape = x.shape();
    shape.back() = out_f;
    Tensor<T> out(shape);
    kn::gemm(false, false, rows, out_f, in, x.value().ptr(), w.value().ptr(), out.ptr(), false);
    if (bias.defined()) {
        for (int r = 0; r < rows; ++r) {
            T* row = out.ptr() + static_cast<std::size_t>(r) * out_f;
            for (int j = 0; j < out_f; ++j) row[j] += bias.value().data[j];
        }
    }
    return make_op<T>(std::move(out), {x, w, bias}, [rows, in, out_f](Node<T>& self) {
        const T* gy = self.grad.data();
        if (T* gx = in_grad(self, 0)) {
            kn::gemm(false, true, rows, in, out_f, gy, in_value(self, 1).ptr(), gx, true);
        }
        if (T* gw = in_grad(self, 1)) {
            kn::gemm(true, false, in, out_f, rows, in_value(self, 0).ptr(), gy, gw, true);
        }
        if (T* gb = in_grad(self, 2)) {
            for (int r = 0; r < rows; ++r) {
                for (int j = 0; j < out_f; ++j) gb[j] += gy[static_cast<std::size_t>(r) * out_f + j];
            }
        }
    });
}

template <typename T>
Var<T> gather(const Var<T>& x, std::shared_ptr<const std::vector<int>> index, Shape shape)
{
    require(index->size() == shape_numel(shape), "gather: index size does not match shape");
    Tensor<T> out(std::move(shape));
    const auto& xv = x.value().data;
    for (std::size_t i = 0; i < index->size(); ++i) {
        const int src = (*index)[i];
        require(src >= 0 && static_cast<std::size_t>(src) < xv.size(), "gather: index out of range");
        out.data[i] = xv[static_cast<std::size_t>(src)];
    }
    return make_op<T>(std::move(out), {x}, [index](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (std::size_t i = 0; i < index->size(); ++i) g[(*index)[i]] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> slice_last(const Var<T>& x, int offset, int len)
{
    const int last = x.value().dim(-1);
    require(offset >= 0 && len >= 0 && offset + len <= last, "slice_last: range out of bounds");
    const std::size_t rows = x.numel() / last;
    Shape shape = x.shape();
    shape.back() = len;
    Tensor<T> out(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.value().ptr() + r * last + offset, len, out.ptr() + r * len);
    }
    return make_op<T>(std::move(out), {x}, [rows, last, offset, len](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (int j = 0; j < len; ++j) g[r * last + offset + j] += self.grad[r * len + j];
            }
        }
    });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int c0, int c1)
{
    require(x.value().rank() == 4, "slice_channels: expects NCHW");
    const int b = x.value().dim(0);
    const int c = x.value().dim(1);
    require(c0 >= 0 && c0 < c1 && c1 <= c, "slice_channels: range out of bounds");
    const std::size_t plane = static_cast<std::size_t>(x.value().dim(2)) * x.value().dim(3);
    Tensor<T> out({b, c1 - c0, x.value().dim(2), x.value().dim(3)});
    const std::size_t chunk = (c1 - c0) * plane;
    for (int i = 0; i < b; ++i) {
        std::copy_n(x.value().ptr() + (i * c + c0) * plane, chunk, out.ptr() + i * chunk);
    }
    return make_op<T>(std::move(out), {x}, [b, c, c0, plane, chunk](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            for (int i = 0; i < b; ++i) {
                T* dst = g + (i * c + c0) * plane;
                const T* src = self.grad.data() + i * chunk;
                for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
            }
        }
    });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b)
{
    require(a.value().rank() == 4 && b.value().rank() == 4, "concat_channels: expects NCHW");
    require(a.value().dim(0) == b.value().dim(0) && a.value().dim(2) == b.value().dim(2) &&
                a.value().dim(3) == b.value().dim(3),
            "concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int n = a.value().dim(0);
    const std::size_t plane = static_cast<std::size_t>(a.value().dim(2)) * a.value().dim(3);
    const std::size_t ca = a.value().dim(1) * plane;
    const std::size_t cb = b.value().dim(1) * plane;
    Tensor<T> out({n, a.value().dim(1) + b.value().dim(1), a.value().dim(2), a.value().dim(3)});
    for (int i = 0; i < n; ++i) {
        std::copy_n(a.value().ptr() + i * ca, ca, out.ptr() + i * (ca + cb));
        std::copy_n(b.value().ptr() + i * cb, cb, out.ptr() + i * (ca + cb) + ca);
    }
    return make_op<T>(std::move(out), {a, b}, [n, ca, cb](Node<T>& self) {
        const T* g = self.grad.data();
        if (T* ga = in_grad(self, 0)) {
            for (int i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * (ca + cb) + j];
            }
        }
        if (T* gb = in_grad(self, 1)) {
            for (int i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * (ca + cb) + ca + j];
            }
        }
    });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, T eps)
{
    const int d = x.value().dim(-1);
    const std::size_t rows = x.numel() / d;
    Tensor<T> out(x.shape());
    auto rstd = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.value().ptr() + r * d;
        T mu = 0;
        for (int j = 0; j < d; ++j) mu += xr[j];
        mu /= d;
        T var = 0;
        for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= d;
        const T rs = T(1) / std::sqrt(var + eps);
        (*rstd)[r] = rs;
        T* yr = out.ptr() + r * d;
        for (int j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * rs;
    }
    return make_op<T>(std::move(out), {x}, [rows, d, rstd](Node<T>& self) {
        T* gx = in_grad(self, 0);
        if (gx == nullptr) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const T* g = self.grad.data() + r * d;
            const T* y = self.value.ptr() + r * d;
            T mg = 0;
            T mgy = 0;
            for (int j = 0; j < d; ++j) {
                mg += g[j];
                mgy += g[j] * y[j];
            }
            mg /= d;
            mgy /= d;
            const T rs = (*rstd)[r];
            for (int j = 0; j < d; ++j) gx[r * d + j] += rs * (g[j] - mg - y[j] * mgy);
        }
    });
}

template <typename T>
Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale_v)
{
    require(x.value().rank() == 3, "modulate: expects [B, N, d]");
    const int b = x.value().dim(0);
    const int n = x.value().dim(1);
    const int d = x.value().dim(2);
    require(shift.shape() == Shape({b, d}) && scale_v.shape() == Shape({b, d}),
            "modulate: conditioning width mismatch");
    Tensor<T> out(x.shape());
    for (int i = 0; i < b; ++i) {
        const T* sh = shift.value().ptr() + i * d;
        const T* sc = scale_v.value().ptr() + i * d;
        for (int t = 0; t < n; ++t) {
            const std::size_t base = (static_cast<std::size_t>(i) * n + t) * d;
            for (int j = 0; j < d; ++j) {
                out.data[base + j] = x.value().data[base + j] * (T(1) + sc[j]) + sh[j];
            }
        }
    }
    return make_op<T>(std::move(out), {x, shift, scale_v}, [b, n, d](Node<T>& self) {
        const auto& xv = in_value(self, 0).data;
        const auto& sc = in_value(self, 2).data;
        T* gx = in_grad(self, 0);
        T* gsh = in_grad(self, 1);
        T* gsc = in_grad(self, 2);
        for (int i = 0; i < b; ++i) {
            for (int t = 0; t < n; ++t) {
                const std::size_t base = (static_cast<std::size_t>(i) * n + t) * d;
                for (int j = 0; j < d; ++j) {
                    const T g = self.grad[base + j];
                    if (gx) gx[base + j] += g * (T(1) + sc[i * d + j]);
                    if (gsh) gsh[i * d + j] += g;
                    if (gsc) gsc[i * d + j] += g * xv[base + j];
                }
            }
        }
    });
}

template <typename T>
Var<T> gated_add(const Var<T>& x, const Var<T>& gate, const Var<T>& y)
{
    same_shape(x, y, "gated_add");
    require(x.value().rank() == 3, "gated_add: expects [B, N, d]");
    const int b = x.value().dim(0);
    const int n = x.value().dim(1);
    const int d = x.value().dim(2);
    require(gate.shape() == Shape({b, d}), "gated_add: gate width mismatch");
    Tensor<T> out = x.value();
    for (int i = 0; i < b; ++i) {
        for (int t = 0; t < n; ++t) {
            const std::size_t base = (static_cast<std::size_t>(i) * n + t) * d;
            for (int j = 0; j < d; ++j) {
                out.data[base + j] += gate.value().data[i * d + j] * y.value().data[base + j];
            }
        }
    }
    return make_op<T>(std::move(out), {x, gate, y}, [b, n, d](Node<T>& self) {
        const auto& gv = in_value(self, 1).data;
        const auto& yv = in_value(self, 2).data;
        T* gx = in_grad(self, 0);
        T* gg = in_grad(self, 1);
        T* gy = in_grad(self, 2);
        for (int i = 0; i < b; ++i) {
            for (int t = 0; t < n; ++t) {
                const std::size_t base = (static_cast<std::size_t>(i) * n + t) * d;
                for (int j = 0; j < d; ++j) {
                    const T g = self.grad[base + j];
                    if (gx) gx[base + j] += g;
                    if (gg) gg[i * d + j] += g * yv[base + j];
                    if (gy) gy[base + j] += g * gv[i * d + j];
                }
            }
        }
    });
}

template <typename T>
Var<T> attention(const Var<T>& qkv, int heads)
{
    require(qkv.value().rank() == 3 && qkv.value().dim(2) % 3 == 0, "attention: expects [B, N, 3d]");
    kernels::AttnGeom g{qkv.value().dim(0), qkv.value().dim(1), qkv.value().dim(2) / 3, heads};
    require(heads > 0 && g.width % heads == 0, "attention: width not divisible by heads");
    Tensor<T> out({g.batch, g.tokens, g.width});
    auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(g.batch) * heads *
                                                  g.tokens * g.tokens);
    kn::attention_forward(g, qkv.value().ptr(), out.ptr(), probs->data());
    return make_op<T>(std::move(out), {qkv}, [g, probs](Node<T>& self) {
        if (T* gq = in_grad(self, 0)) {
            kn::attention_backward(g, in_value(self, 0).ptr(), probs->data(), self.grad.data(), gq);
        }
    });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int kernel, int stride,
              int pad)
{
    require(x.value().rank() == 4, "conv2d: expects NCHW input, got " + shape_str(x.shape()));
    kernels::ConvGeom g;
    g.batch = x.value().dim(0);
    g.in_channels = x.value().dim(1);
    g.height = x.value().dim(2);
    g.width = x.value().dim(3);
    g.out_channels = w.value().dim(0);
    g.kernel = kernel;
    g.stride = stride;
    g.pad = pad;
    require(w.value().rank() == 2 && w.value().dim(1) == g.patch_size(),
            "conv2d: weight " + shape_str(w.shape()) + " does not fit input " + shape_str(x.shape()));
    Tensor<T> out({g.batch, g.out_channels, g.out_height(), g.out_width()});
    kn::conv2d_forward(g, x.value().ptr(), w.value().ptr(),
                       bias.defined() ? bias.value().ptr() : static_cast<const T*>(nullptr),
                       out.ptr());
    return make_op<T>(std::move(out), {x, w, bias}, [g](Node<T>& self) {
        kn::conv2d_backward(g, in_value(self, 0).ptr(), in_value(self, 1).ptr(),
                            self.grad.data(), in_grad(self, 0), in_grad(self, 1),
                            in_grad(self, 2));
    });
}

template <typename T>
Var<T> upsample2x(const Var<T>& x)
{
    require(x.value().rank() == 4, "upsample2x: expects NCHW");
    const int planes = x.value().dim(0) * x.value().dim(1);
    const int h = x.value().dim(2);
    const int w = x.value().dim(3);
    Tensor<T> out({x.value().dim(0), x.value().dim(1), 2 * h, 2 * w});
    for (int p = 0; p < planes; ++p) {
        const T* src = x.value().ptr() + static_cast<std::size_t>(p) * h * w;
        T* dst = out.ptr() + static_cast<std::size_t>(p) * 4 * h * w;
        for (int y = 0; y < 2 * h; ++y) {
            for (int xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
        }
    }
    return make_op<T>(std::move(out), {x}, [planes, h, w](Node<T>& self) {
        T* gx = in_grad(self, 0);
        if (gx == nullptr) return;
        for (int p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + static_cast<std::size_t>(p) * 4 * h * w;
            T* dst = gx + static_cast<std::size_t>(p) * h * w;
            for (int y = 0; y < 2 * h; ++y) {
                for (int xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
            }
        }
    });
}

template <typename T>
Var<T> avg_pool2x(const Var<T>& x)
{
    require(x.value().rank() == 4 && x.value().dim(2) % 2 == 0 && x.value().dim(3) % 2 == 0,
            "avg_pool2x: expects NCHW with even spatial size");
    const int planes = x.value().dim(0) * x.value().dim(1);
    const int h = x.value().dim(2) / 2;
    const int w = x.value().dim(3) / 2;
    Tensor<T> out({x.value().dim(0), x.value().dim(1), h, w});
    for (int p = 0; p < planes; ++p) {
        const T* src = x.value().ptr() + static_cast<std::size_t>(p) * 4 * h * w;
        T* dst = out.ptr() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const T* s = src + (2 * y) * 2 * w + 2 * xx;
                dst[y * w + xx] = T(0.25) * (s[0] + s[1] + s[2 * w] + s[2 * w + 1]);
            }
        }
    }
    return make_op<T>(std::move(out), {x}, [planes, h, w](Node<T>& self) {
        T* gx = in_grad(self, 0);
        if (gx == nullptr) return;
        for (int p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + static_cast<std::size_t>(p) * h * w;
            T* dst = gx + static_cast<std::size_t>(p) * 4 * h * w;
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) {
                    const T v = T(0.25) * g[y * w + xx];
                    T* d = dst + (2 * y) * 2 * w + 2 * xx;
                    d[0] += v;
                    d[1] += v;
                    d[2 * w] += v;
                    d[2 * w + 1] += v;
                }
            }
        }
    });
}

namespace {

template <typename T>
Var<T> spatial_diff(const Var<T>& x, bool along_x)
{
    require(x.value().rank() == 4, "diff: expects NCHW");
    const int planes = x.value().dim(0) * x.value().dim(1);
    const int h = x.value().dim(2);
    const int w = x.value().dim(3);
    const int oh = along_x ? h : h - 1;
    const int ow = along_x ? w - 1 : w;
    require(oh >= 1 && ow >= 1, "diff: image too small");
    const int step = along_x ? 1 : w;
    Tensor<T> out({x.value().dim(0), x.value().dim(1), oh, ow});
    for (int p = 0; p < planes; ++p) {
        const T* src = x.value().ptr() + static_cast<std::size_t>(p) * h * w;
        T* dst = out.ptr() + static_cast<std::size_t>(p) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[y * w + xx + step] - src[y * w + xx];
        }
    }
    return make_op<T>(std::move(out), {x}, [planes, h, w, oh, ow, step](Node<T>& self) {
        T* gx = in_grad(self, 0);
        if (gx == nullptr) return;
        for (int p = 0; p < planes; ++p) {
            const T* g = self.grad.data() + static_cast<std::size_t>(p) * oh * ow;
            T* dst = gx + static_cast<std::size_t>(p) * h * w;
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    dst[y * w + xx + step] += g[y * ow + xx];
                    dst[y * w + xx] -= g[y * ow + xx];
                }
            }
        }
    });
}

}  // namespace

template <typename T>
Var<T> diff_x(const Var<T>& x)
{
    return spatial_diff(x, true);
}

template <typename T>
Var<T> diff_y(const Var<T>& x)
{
    return spatial_diff(x, false);
}

template <typename T>
Var<T> sum(const Var<T>& a)
{
    double s = 0;
    for (T v : a.value().data) s += v;
    return scalar_result<T>(s, {a}, [](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            const std::size_t n = self.inputs[0]->value.numel();
            for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
        }
    });
}

template <typename T>
Var<T> mean(const Var<T>& a)
{
    double s = 0;
    for (T v : a.value().data) s += v;
    const std::size_t n = a.numel();
    return scalar_result<T>(s / static_cast<double>(n), {a}, [n](Node<T>& self) {
        if (T* g = in_grad(self, 0)) {
            const T v = self.grad[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) g[i] += v;
        }
    });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b)
{
    same_shape(a, b, "mse");
    const std::size_t n = a.numel();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.value().data[i]) - b.value().data[i];
        s += d * d;
    }
    return scalar_result<T>(s / static_cast<double>(n), {a, b}, [n](Node<T>& self) {
        const auto& av = in_value(self, 0).data;
        const auto& bv = in_value(self, 1).data;
        const T k = T(2) * self.grad[0] / static_cast<T>(n);
        T* ga = in_grad(self, 0);
        T* gb = in_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = av[i] - bv[i];
            if (ga) ga[i] += k * d;
            if (gb) gb[i] -= k * d;
        }
    });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b)
{
    same_shape(a, b, "mean_abs_diff");
    const std::size_t n = a.numel();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s += std::abs(static_cast<double>(a.value().data[i]) - b.value().data[i]);
    }
    return scalar_result<T>(s / static_cast<double>(n), {a, b}, [n](Node<T>& self) {
        const auto& av = in_value(self, 0).data;
        const auto& bv = in_value(self, 1).data;
        const T k = self.grad[0] / static_cast<T>(n);
        T* ga = in_grad(self, 0);
        T* gb = in_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = av[i] - bv[i];
            const T sg = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
            if (ga) ga[i] += k * sg;
            if (gb) gb[i] -= k * sg;
        }
    });
}

template <typename T>
Var<T> kl_std_normal(const Var<T>& mu, const Var<T>& logvar)
{
    same_shape(mu, logvar, "kl_std_normal");
    const std::size_t n = mu.numel();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = mu.value().data[i];
        const double lv = logvar.value().data[i];
        s += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    return scalar_result<T>(s / static_cast<double>(n), {mu, logvar}, [n](Node<T>& self) {
        const auto& mv = in_value(self, 0).data;
        const auto& lv = in_value(self, 1).data;
        const T k = self.grad[0] / static_cast<T>(n);
        if (T* gm = in_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) gm[i] += k * mv[i];
        }
        if (T* gl = in_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) gl[i] += k * T(0.5) * (std::exp(lv[i]) - T(1));
        }
    });
}

#define A2A_INSTANTIATE(T)                                                                    \
    template void backward<T>(const Var<T>&);                                                 \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> scale<T>(const Var<T>&, T);                                               \
    template Var<T> silu<T>(const Var<T>&);                                                   \
    template Var<T> gelu<T>(const Var<T>&);                                                   \
    template Var<T> tanh<T>(const Var<T>&);                                                   \
    template Var<T> exp<T>(const Var<T>&);                                                    \
    template Var<T> clamp<T>(const Var<T>&, T, T);                                            \
    template Var<T> detach<T>(const Var<T>&);                                                 \
    template Var<T> reshape<T>(const Var<T>&, Shape);                                         \
    template Var<T> add_broadcast<T>(const Var<T>&, const Var<T>&);                           \
    template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                   \
    template Var<T> gather<T>(const Var<T>&, std::shared_ptr<const std::vector<int>>, Shape); \
    template Var<T> slice_last<T>(const Var<T>&, int, int);                                   \
    template Var<T> slice_channels<T>(const Var<T>&, int, int);                               \
    template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                         \
    template Var<T> layer_norm<T>(const Var<T>&, T);                                          \
    template Var<T> modulate<T>(const Var<T>&, const Var<T>&, const Var<T>&);                 \
    template Var<T> gated_add<T>(const Var<T>&, const Var<T>&, const Var<T>&);                \
    template Var<T> attention<T>(const Var<T>&, int);                                         \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);    \
    template Var<T> upsample2x<T>(const Var<T>&);                                             \
    template Var<T> avg_pool2x<T>(const Var<T>&);                                             \
    template Var<T> diff_x<T>(const Var<T>&);                                                 \
    template Var<T> diff_y<T>(const Var<T>&);                                                 \
    template Var<T> sum<T>(const Var<T>&);                                                    \
    template Var<T> mean<T>(const Var<T>&);                                                   \
    template Var<T> mse<T>(const Var<T>&, const Var<T>&);                                     \
    template Var<T> mean_abs_diff<T>(const Var<T>&, const Var<T>&);                           \
    template Var<T> kl_std_normal<T>(const Var<T>&, const Var<T>&);

A2A_INSTANTIATE(float)
A2A_INSTANTIATE(double)

}  // namespace a2a::ag
