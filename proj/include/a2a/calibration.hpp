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

#include <cstdint>

#include "a2a/autograd.hpp"
#include "a2a/latent.hpp"
#include "a2a/nn.hpp"
#include "a2a/registry.hpp"

namespace a2a {

/// One residual correction branch per target modality, at latent resolution:
/// conv3x3(c -> 2c), SiLU, conv3x3(2c -> c). The second conv starts at zero,
/// so every branch outputs exactly zero until trained.
template <typename T>
class AdapterBank {
public:
    AdapterBank() = default;
    AdapterBank(int num_modalities, LatentShape contract, std::uint64_t seed);

    int size() const { return num_modalities_; }
    const LatentShape& contract() const { return contract_; }
    nn::ParamStore<T>& params() { return params_; }
    const nn::ParamStore<T>& params() const { return params_; }

    /// A^(tgt)(z) for a batch of latents.
    ag::Var<T> branch(ModalityId tgt, const ag::Var<T>& z) const;

    /// z + A^(tgt)(z); consults only branch tgt.
    BasicLatentBatch<T> calibrate(ModalityId tgt, const BasicLatentBatch<T>& z_hat) const;

    /// Mean squared error of sg(z_hat) + A(sg(z_hat)) against z_target. With
    /// `literal_leading_term` the first z_hat is left attached to the graph.
    ag::Var<T> calibration_loss(const ag::Var<T>& z_hat, const ag::Var<T>& z_target,
                                ModalityId tgt, bool literal_leading_term = false) const;

private:
    int num_modalities_ = 0;
    LatentShape contract_;
    nn::ParamStore<T> params_;
};

/// Registry-sized bank; the registry must be frozen.
template <typename T>
AdapterBank<T> init_adapter_bank(const ModalityRegistry& reg, std::uint64_t seed)
{
    require(reg.frozen(), "init_adapter_bank: registry must be frozen");
    return AdapterBank<T>(reg.size(), reg.contract(), seed);
}

}  // namespace a2a
