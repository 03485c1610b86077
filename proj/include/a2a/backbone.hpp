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
#include <vector>

#include "a2a/autograd.hpp"
#include "a2a/latent.hpp"
#include "a2a/nn.hpp"

namespace a2a {

enum class EmbeddingMode {
    kLearned,  // modality rows are trained with the backbone
    kFixed,    // rows stay at their seeded initial values
};

struct BackboneConfig {
    LatentShape latent;
    int num_modalities = 5;
    int patch = 2;
    int width = 128;
    int depth = 6;
    int heads = 4;
    int mlp_ratio = 4;
    /// Sinusoidal timestep feature count before the two-layer map.
    int time_features = 64;
    EmbeddingMode embedding = EmbeddingMode::kLearned;

    int in_channels() const { return 2 * latent.c; }
    int tokens() const { return (latent.h / patch) * (latent.w / patch); }
    int patch_dim_in() const { return in_channels() * patch * patch; }
    int patch_dim_out() const { return latent.c * patch * patch; }

    void validate() const;
};

/// Closed-form trainable parameter count of a backbone with this config.
std::size_t backbone_param_count(const BackboneConfig& cfg);

/// [z_t, z_src] along channels; noisy target first. Both must be scaled.
Tensor<float> construct_input(const LatentBatch& z_t, const LatentBatch& z_src);

/// Shared x0-predicting transformer over patchified [z_t, z_src] latents.
///
/// Conditioning c = MLP(e_t + e_src + e_tgt) drives per-block AdaLN
/// (shift, scale, gate) triples for the attention and feed-forward
/// sub-layers. The modulation projections and the output head start at
/// zero, so a fresh backbone predicts exactly zero for every input.
template <typename T>
class Backbone {
public:
    Backbone() = default;
    Backbone(BackboneConfig cfg, std::uint64_t seed);

    const BackboneConfig& config() const { return cfg_; }
    nn::ParamStore<T>& params() { return params_; }
    const nn::ParamStore<T>& params() const { return params_; }

    /// Conditioning vectors [B, width] for per-example (t, src, tgt).
    ag::Var<T> build_conditioning(const std::vector<int>& t, const std::vector<int>& src,
                                  const std::vector<int>& tgt) const;

    /// One transformer block applied to tokens x [B, N, width].
    ag::Var<T> block(int index, const ag::Var<T>& x, const ag::Var<T>& c) const;

    /// Clean-latent prediction [B, c, h, w] from input [B, 2c, h, w].
    ag::Var<T> predict_x0(const ag::Var<T>& input, const ag::Var<T>& c) const;

    /// Convenience: conditioning + prediction in one call.
    ag::Var<T> forward(const ag::Var<T>& input, const std::vector<int>& t,
                       const std::vector<int>& src, const std::vector<int>& tgt) const;

    /// Sinusoidal features of t, [B, time_features].
    Tensor<T> timestep_features(const std::vector<int>& t) const;

private:
    ag::Var<T> lin(const std::string& name, const ag::Var<T>& x) const;

    BackboneConfig cfg_;
    nn::ParamStore<T> params_;
    ag::Var<T> pos_;  // fixed 2-D sinusoidal position features [N, width]
};

/// Fixed 2-D sine/cosine position features for a grid_h x grid_w token grid.
template <typename T>
Tensor<T> sincos_2d(int grid_h, int grid_w, int width);

}  // namespace a2a
