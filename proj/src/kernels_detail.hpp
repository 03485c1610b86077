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

// Row-level bodies shared by the serial and OpenMP kernel variants.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "a2a/kernels.hpp"

namespace a2a::kernels::detail {

template <typename T>
struct GemmOperands {
    bool trans_a;
    int m;
    int n;
    int k;
    const T* a;
    const T* b;  // k x n, row-major (already transposed when needed)
    T* c;
    bool accumulate;
};

template <typename T>
inline T a_elem(const GemmOperands<T>& op, int i, int kk)
{
    return op.trans_a ? op.a[static_cast<std::size_t>(kk) * op.m + i]
                      : op.a[static_cast<std::size_t>(i) * op.k + kk];
}

/// Rows [i0, i1) of C. Blocks of four rows share each B row load.
template <typename T>
inline void gemm_rows(const GemmOperands<T>& op, int i0, int i1)
{
    const int n = op.n;
    int i = i0;
    for (; i + 4 <= i1; i += 4) {
        T* __restrict c0 = op.c + static_cast<std::size_t>(i) * n;
        T* __restrict c1 = c0 + n;
        T* __restrict c2 = c1 + n;
        T* __restrict c3 = c2 + n;
        if (!op.accumulate) {
            std::fill(c0, c0 + 4 * static_cast<std::size_t>(n), T(0));
        }
        for (int kk = 0; kk < op.k; ++kk) {
            const T a0 = a_elem(op, i, kk);
            const T a1 = a_elem(op, i + 1, kk);
            const T a2 = a_elem(op, i + 2, kk);
            const T a3 = a_elem(op, i + 3, kk);
            const T* __restrict b = op.b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                const T bj = b[j];
                c0[j] += a0 * bj;
                c1[j] += a1 * bj;
                c2[j] += a2 * bj;
                c3[j] += a3 * bj;
            }
        }
    }
    for (; i < i1; ++i) {
        T* __restrict c0 = op.c + static_cast<std::size_t>(i) * n;
        if (!op.accumulate) {
            std::fill(c0, c0 + n, T(0));
        }
        for (int kk = 0; kk < op.k; ++kk) {
            const T a0 = a_elem(op, i, kk);
            const T* __restrict b = op.b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                c0[j] += a0 * b[j];
            }
        }
    }
}

/// Transposes an r x c row-major matrix into out (c x r).
template <typename T>
inline void transpose(const T* in, int r, int c, T* out)
{
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out[static_cast<std::size_t>(j) * r + i] = in[static_cast<std::size_t>(i) * c + j];
        }
    }
}

template <typename T>
inline void im2col(const ConvGeom& g, const T* x, T* col)
{
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int hw = ho * wo;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        const T* plane = x + static_cast<std::size_t>(ci) * g.height * g.width;
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                T* dst = col + static_cast<std::size_t>((ci * g.kernel + ky) * g.kernel + kx) * hw;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    T* row = dst + oy * wo;
                    if (iy < 0 || iy >= g.height) {
                        std::fill(row, row + wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * g.width;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        row[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
inline void col2im_add(const ConvGeom& g, const T* col, T* dx)
{
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int hw = ho * wo;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        T* plane = dx + static_cast<std::size_t>(ci) * g.height * g.width;
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const T* src =
                    col + static_cast<std::size_t>((ci * g.kernel + ky) * g.kernel + kx) * hw;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.height) {
                        continue;
                    }
                    T* row = plane + static_cast<std::size_t>(iy) * g.width;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.width) {
                            row[ix] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
inline void add_bias_planes(const ConvGeom& g, const T* bias, T* y_item)
{
    if (bias == nullptr) {
        return;
    }
    const int hw = g.out_height() * g.out_width();
    for (int co = 0; co < g.out_channels; ++co) {
        T* plane = y_item + static_cast<std::size_t>(co) * hw;
        const T bv = bias[co];
        for (int j = 0; j < hw; ++j) {
            plane[j] += bv;
        }
    }
}

/// Forward attention for one (batch item, head) pair.
template <typename T>
inline void attention_head_forward(const AttnGeom& g, int b, int h, const T* qkv, T* out,
                                   T* probs)
{
    const int n = g.tokens;
    const int d = g.width;
    const int dh = g.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    const T* base = qkv + static_cast<std::size_t>(b) * n * 3 * d;
    T* p = probs + (static_cast<std::size_t>(b) * g.heads + h) * n * n;
    for (int i = 0; i < n; ++i) {
        const T* q = base + static_cast<std::size_t>(i) * 3 * d + h * dh;
        T* prow = p + static_cast<std::size_t>(i) * n;
        T mx = -INFINITY;
        for (int j = 0; j < n; ++j) {
            const T* kv = base + static_cast<std::size_t>(j) * 3 * d + d + h * dh;
            T s = 0;
            for (int e = 0; e < dh; ++e) {
                s += q[e] * kv[e];
            }
            prow[j] = s * scale;
            mx = std::max(mx, prow[j]);
        }
        T sum = 0;
        for (int j = 0; j < n; ++j) {
            prow[j] = std::exp(prow[j] - mx);
            sum += prow[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < n; ++j) {
            prow[j] *= inv;
        }
        T* o = out + (static_cast<std::size_t>(b) * n + i) * d + h * dh;
        std::fill(o, o + dh, T(0));
        for (int j = 0; j < n; ++j) {
            const T* v = base + static_cast<std::size_t>(j) * 3 * d + 2 * d + h * dh;
            const T pj = prow[j];
            for (int e = 0; e < dh; ++e) {
                o[e] += pj * v[e];
            }
        }
    }
}

/// Backward attention for one (batch item, head); writes disjoint columns of dqkv.
template <typename T>
inline void attention_head_backward(const AttnGeom& g, int b, int h, const T* qkv,
                                    const T* probs, const T* dout, T* dqkv,
                                    std::vector<T>& ds)
{
    const int n = g.tokens;
    const int d = g.width;
    const int dh = g.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    const std::size_t row = static_cast<std::size_t>(3) * d;
    const T* base = qkv + static_cast<std::size_t>(b) * n * row;
    T* dbase = dqkv + static_cast<std::size_t>(b) * n * row;
    const T* p = probs + (static_cast<std::size_t>(b) * g.heads + h) * n * n;
    ds.assign(static_cast<std::size_t>(n) * n, T(0));

    for (int i = 0; i < n; ++i) {
        const T* go = dout + (static_cast<std::size_t>(b) * n + i) * d + h * dh;
        const T* prow = p + static_cast<std::size_t>(i) * n;
        T* dsrow = ds.data() + static_cast<std::size_t>(i) * n;
        T dot = 0;
        for (int j = 0; j < n; ++j) {
            const T* v = base + j * row + 2 * d + h * dh;
            T dp = 0;
            for (int e = 0; e < dh; ++e) {
                dp += go[e] * v[e];
            }
            dsrow[j] = dp;
            dot += dp * prow[j];
        }
        for (int j = 0; j < n; ++j) {
            dsrow[j] = prow[j] * (dsrow[j] - dot) * scale;
        }
    }
    // dV[j] += sum_i P[i, j] dO[i]
    for (int j = 0; j < n; ++j) {
        T* dv = dbase + j * row + 2 * d + h * dh;
        for (int i = 0; i < n; ++i) {
            const T pij = p[static_cast<std::size_t>(i) * n + j];
            const T* go = dout + (static_cast<std::size_t>(b) * n + i) * d + h * dh;
            for (int e = 0; e < dh; ++e) {
                dv[e] += pij * go[e];
            }
        }
    }
    // dQ[i] += sum_j dS[i, j] K[j];  dK[j] += sum_i dS[i, j] Q[i]
    for (int i = 0; i < n; ++i) {
        T* dq = dbase + i * row + h * dh;
        for (int j = 0; j < n; ++j) {
            const T s = ds[static_cast<std::size_t>(i) * n + j];
            const T* kv = base + j * row + d + h * dh;
            for (int e = 0; e < dh; ++e) {
                dq[e] += s * kv[e];
            }
        }
    }
    for (int j = 0; j < n; ++j) {
        T* dk = dbase + j * row + d + h * dh;
        for (int i = 0; i < n; ++i) {
            const T s = ds[static_cast<std::size_t>(i) * n + j];
            const T* q = base + i * row + h * dh;
            for (int e = 0; e < dh; ++e) {
                dk[e] += s * q[e];
            }
        }
    }
}

}  // namespace a2a::kernels::detail
