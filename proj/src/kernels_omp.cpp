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

#ifdef _OPENMP
#include <omp.h>
#endif

namespace a2a::kernels {

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace omp {

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
    const int blocks = (m + 3) / 4;
    // Small products are not worth a parallel region.
    const bool wide = static_cast<long>(m) * n * k > 32768;
#pragma omp parallel for schedule(static) if (wide)
    for (int blk = 0; blk < blocks; ++blk) {
        detail::gemm_rows(op, blk * 4, std::min(m, blk * 4 + 4));
    }
}

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* bias, T* y)
{
    const int hw = g.out_height() * g.out_width();
    const int kp = g.patch_size();
    const std::size_t in_item = static_cast<std::size_t>(g.in_channels) * g.height * g.width;
    const std::size_t out_item = static_cast<std::size_t>(g.out_channels) * hw;
#pragma omp parallel
    {
        std::vector<T> col(static_cast<std::size_t>(kp) * hw);
#pragma omp for schedule(static)
        for (int b = 0; b < g.batch; ++b) {
            detail::im2col(g, x + b * in_item, col.data());
            const detail::GemmOperands<T> op{false, g.out_channels, hw, kp, w, col.data(),
                                             y + b * out_item, false};
            detail::gemm_rows(op, 0, g.out_channels);
            detail::add_bias_planes(g, bias, y + b * out_item);
        }
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
    // Weight and bias gradients reduce over the batch: keep the item loop
    // ordered and parallelize inside each product.
    if (dw != nullptr || db != nullptr) {
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
    }
    if (dx != nullptr) {
#pragma omp parallel
        {
            std::vector<T> col(static_cast<std::size_t>(kp) * hw);
#pragma omp for schedule(static)
            for (int b = 0; b < g.batch; ++b) {
                const detail::GemmOperands<T> op{true, kp, hw, g.out_channels, w,
                                                 dy + b * out_item, col.data(), false};
                detail::gemm_rows(op, 0, kp);
                detail::col2im_add(g, col.data(), dx + b * in_item);
            }
        }
    }
}

template <typename T>
void attention_forward(const AttnGeom& g, const T* qkv, T* out, T* probs)
{
    const int pairs = g.batch * g.heads;
#pragma omp parallel for schedule(static)
    for (int bh = 0; bh < pairs; ++bh) {
        detail::attention_head_forward(g, bh / g.heads, bh % g.heads, qkv, out, probs);
    }
}

template <typename T>
void attention_backward(const AttnGeom& g, const T* qkv, const T* probs, const T* dout,
                        T* dqkv)
{
    const int pairs = g.batch * g.heads;
#pragma omp parallel
    {
        std::vector<T> ds;
#pragma omp for schedule(static)
        for (int bh = 0; bh < pairs; ++bh) {
            detail::attention_head_backward(g, bh / g.heads, bh % g.heads, qkv, probs, dout,
                                            dqkv, ds);
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

}  // namespace omp
}  // namespace a2a::kernels
