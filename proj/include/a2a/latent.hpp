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

#include "a2a/registry.hpp"
#include "a2a/tensor.hpp"

namespace a2a {

/// Latents of shape (batch, c, h, w) in the shared manifold.
template <typename T>
struct BasicLatentBatch {
    Tensor<T> data;
    ModalityId modality = 0;
    /// Whether the modality's scale factor has been applied.
    bool scaled = false;

    int batch() const { return data.rank() == 4 ? data.dim(0) : 0; }
};

using LatentBatch = BasicLatentBatch<float>;

/// Throws unless t is (batch, c, h, w) for the given contract.
template <typename T>
void check_latent_shape(const Tensor<T>& t, const LatentShape& contract, const char* what)
{
    const bool ok = t.rank() == 4 && t.dim(1) == contract.c && t.dim(2) == contract.h &&
                    t.dim(3) == contract.w;
    require(ok, std::string(what) + ": expected latent (B, " + std::to_string(contract.c) + ", " +
                    std::to_string(contract.h) + ", " + std::to_string(contract.w) + "), got " +
                    shape_str(t.shape));
}

}  // namespace a2a
