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

namespace a2a::kernels {

/// Geometry of a square-kernel 2-D convolution over NCHW data.
struct ConvGeom {
    int batch = 1;
    int in_channels = 1;
    int height = 1;
    int width = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
    int patch_size() const { return in_channels * kernel * kernel; }
};

/// Multi-head self-attention over rows packed as [q | k | v], each of width d.
struct AttnGeom {
    int batch = 1;
    int tokens = 1;
    int width = 1;
    int heads = 1;

    int head_dim() const { return width / heads; }
};

// Each kernel exists twice. `serial` is the reference; `omp` distributes
// independent output rows (or batch items) across OpenMP threads. Both
// accumulate every output element in the same order, so they agree
// bitwise for any thread count.
//
//   gemm:               C = op(A) op(B), op(A) is m x k and op(B) is k x n;
//                       adds into C when `accumulate`.
//   conv2d_forward:     y[B, Co, Ho, Wo] = conv(x, w[Co, Ci*k*k]) + bias.
//   conv2d_backward:    accumulates into dx, dw, db (each may be null).
//   attention_forward:  out[B, N, d]; probs[B, H, N, N] kept for backward.
//   attention_backward: accumulates into dqkv.

namespace serial {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
          bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* db);

template <typename T>
void attention_forward(const AttnGeom& g, const T* qkv, T* out, T* probs);

template <typename T>
void attention_backward(const AttnGeom& g, const T* qkv, const T* probs, const T* dout,
                        T* dqkv);

}  // namespace serial

namespace omp {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
          bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* db);

template <typename T>
void attention_forward(const AttnGeom& g, const T* qkv, T* out, T* probs);

template <typename T>
void attention_backward(const AttnGeom& g, const T* qkv, const T* probs, const T* dout,
                        T* dqkv);

}  // namespace omp

/// Threads available to the omp kernels (1 when built without OpenMP).
int max_threads();

}  // namespace a2a::kernels
