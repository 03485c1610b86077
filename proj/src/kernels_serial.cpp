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

#include "kernels_detail.hpp"

namespace a2a::kernels::serial {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
          bool accumulate)
{
    std::vector<T> packed;
    const T* bp = b;
    if (trans_b) {
        packed.resize(static_cast<std::size_t>(k) * n);
        detail::transpose(b, n, k, packed.data());
        bp = packed.data();
    }
    const detail::GemmOperands<T> op{trans_a, m, n, k, a, bp, c, accumulate};
    detail::gemm_rows(op, 0, m);
}

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* bias, T* y)
{
    const int hw = g.out_height() * g.out_width();
    const std::size_t in_item = static_cast<std::size_t>(g.in_channels) * g.height * g.width;
    const std::size_t out_item = static_cast<std::size_t>(g.out_channels) * hw;
    std::vector<T> col(static_cast<std::size_t>(g.patch_size()) * hw);
    for (int b = 0; b < g.batch; ++b) {
        detail::im2col(g, x + b * in_item, col.data());
        gemm(false, false, g.out_channels, hw, g.patch_size(), w, col.data(), y + b * out_item,
             false);
        detail::add_bias_planes(g, bias, y + b * out_item);
    }
}

template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* db)
{
    const int hw = g.out_height() * g.out_width();
    const int kp = g.patch_size();
    const std::size_t in_item = static_cast<std::size_t>(g.in_channels) * g.height * g.width;
    const std::size_t out_item = static_cast<std::size_t>(g.out_channels) * hw;
    std::vector<T> col(static_cast<std::size_t>(kp) * hw);
    for (int b = 0; b < g.batch; ++b) {
        const T* dyb = dy + b * out_item;
        if (dw != nullptr) {
            detail::im2col(g, x + b * in_item, col.data());
            gemm(false, true, g.out_channels, kp, hw, dyb, col.data(), dw, true);
        }
        if (db != nullptr) {
            for (int co = 0; co < g.out_channels; ++co) {
                T s = 0;
                for (int j = 0; j < hw; ++j) {
                    s += dyb[static_cast<std::size_t>(co) * hw + j];
                }
                db[co] += s;
            }
        }
    }
    if (dx != nullptr) {
        for (int b = 0; b < g.batch; ++b) {
            gemm(true, false, kp, hw, g.out_channels, w, dy + b * out_item, col.data(), false);
            detail::col2im_add(g, col.data(), dx + b * in_item);
        }
    }
}

template <typename T>
void attention_forward(const AttnGeom& g, const T* qkv, T* out, T* probs)
{
    for (int b = 0; b < g.batch; ++b) {
        for (int h = 0; h < g.heads; ++h) {
            detail::attention_head_forward(g, b, h, qkv, out, probs);
        }
    }
}

template <typename T>
void attention_backward(const AttnGeom& g, const T* qkv, const T* probs, const T* dout,
                        T* dqkv)
{
    std::vector<T> ds;
    for (int b = 0; b < g.batch; ++b) {
        for (int h = 0; h < g.heads; ++h) {
            detail::attention_head_backward(g, b, h, qkv, probs, dout, dqkv, ds);
        }
    }
}

#define A2A_INSTANTIATE(T)                                                                 \
    template void gemm<T>(bool, bool, int, int, int, const T*, const T*, T*, bool);         \
    template void conv2d_forward<T>(const ConvGeom&, const T*, const T*, const T*, T*);     \
    template void conv2d_backward<T>(const ConvGeom&, const T*, const T*, const T*, T*, T*, \
                                     T*);                                                  \
    template void attention_forward<T>(const AttnGeom&, const T*, T*, T*);                 \
    template void attention_backward<T>(const AttnGeom&, const T*, const T*, const T*, T*);

A2A_INSTANTIATE(float)
A2A_INSTANTIATE(double)

}  // namespace a2a::kernels::serial
