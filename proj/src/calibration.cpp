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

#include "a2a/calibration.hpp"

namespace a2a {

template <typename T>
AdapterBank<T>::AdapterBank(int num_modalities, LatentShape contract, std::uint64_t seed)
    : num_modalities_(num_modalities), contract_(contract)
{
    require(num_modalities >= 1, "adapter bank needs at least one branch");
    Rng rng(seed, 0xada);
    const int c = contract_.c;
    for (int j = 0; j < num_modalities_; ++j) {
        const std::string p = std::to_string(j);
        params_.add(p + ".conv1.w", nn::xavier_uniform<T>(rng, {2 * c, c * 9}, c * 9, 2 * c * 9));
        params_.add(p + ".conv1.b", Tensor<T>({2 * c}));
        params_.add(p + ".conv2.w", Tensor<T>({c, 2 * c * 9}));
        params_.add(p + ".conv2.b", Tensor<T>({c}));
    }
}

template <typename T>
ag::Var<T> AdapterBank<T>::branch(ModalityId tgt, const ag::Var<T>& z) const
{
    require(tgt >= 0 && tgt < num_modalities_, "adapter: target id out of range: " + std::to_string(tgt));
    check_latent_shape(z.value(), contract_, "adapter");
    const std::string p = std::to_string(tgt);
    auto h = ag::silu(ag::conv2d(z, params_.get(p + ".conv1.w"), params_.get(p + ".conv1.b"), 3, 1, 1));
    return ag::conv2d(h, params_.get(p + ".conv2.w"), params_.get(p + ".conv2.b"), 3, 1, 1);
}

template <typename T>
BasicLatentBatch<T> AdapterBank<T>::calibrate(ModalityId tgt, const BasicLatentBatch<T>& z_hat) const
{
    require(z_hat.scaled, "calibrate: latent must be scaled");
    require(z_hat.modality == tgt, "calibrate: latent modality does not match target");
    ag::NoGradGuard guard;
    auto z = ag::Var<T>::leaf(z_hat.data);
    BasicLatentBatch<T> out = z_hat;
    out.data = ag::add(z, branch(tgt, z)).value();
    return out;
}

template <typename T>
ag::Var<T> AdapterBank<T>::calibration_loss(const ag::Var<T>& z_hat, const ag::Var<T>& z_target,
                                            ModalityId tgt, bool literal_leading_term) const
{
    require(z_hat.shape() == z_target.shape(), "calibration_loss: shape mismatch " +
                                                   shape_str(z_hat.shape()) + " vs " +
                                                   shape_str(z_target.shape()));
    auto isolated = ag::detach(z_hat);
    const auto& lead = literal_leading_term ? z_hat : isolated;
    return ag::mse(ag::add(lead, branch(tgt, isolated)), z_target);
}

template class AdapterBank<float>;
template class AdapterBank<double>;

}  // namespace a2a
