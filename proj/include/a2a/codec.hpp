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
#include <functional>
#include <vector>

#include "a2a/autograd.hpp"
#include "a2a/latent.hpp"
#include "a2a/nn.hpp"
#include "a2a/registry.hpp"

namespace a2a {

/// Architecture and loss weights of one modality's variational codec.
struct CodecConfig {
    ModalityId modality = 0;
    int channels = 1;
    int native_size = 32;
    LatentShape latent;
    /// Channel width per resolution level; widths[0] is the native level and
    /// widths[depth] the latent level.
    std::vector<int> widths;
    /// Weight of the perceptual term.
    double gamma = 0.0;
    /// Weight of the KL term.
    double beta_kl = 1e-5;

    int depth() const { return static_cast<int>(widths.size()) - 1; }
};

/// Widths double per stride-2 stage up to `latent_width` at the latent level,
/// never dropping below `min_width`.
CodecConfig make_codec_config(const ModalityRegistry& reg, ModalityId id, int latent_width = 32,
                              int min_width = 8);

/// Reference loss-weight preset: gamma 1 for RGB, 0 elsewhere; beta 1e-5.
void apply_reference_loss_weights(CodecConfig& cfg, const std::string& modality_name);

inline constexpr double kLogvarMin = -30.0;
inline constexpr double kLogvarMax = 20.0;

template <typename T>
struct Posterior {
    ag::Var<T> mean;
    ag::Var<T> logvar;  // clamped to [kLogvarMin, kLogvarMax]
};

template <typename T>
struct EncodeResult {
    BasicLatentBatch<T> latent;  // scaled == false
    Tensor<T> mean;
    Tensor<T> logvar;
};

/// Encoder/decoder pair: conv stride-2 stacks with one residual block at the
/// latent resolution on each side. Decoder output passes through tanh.
template <typename T>
class Codec {
public:
    Codec() = default;
    Codec(CodecConfig cfg, std::uint64_t seed);

    const CodecConfig& config() const { return cfg_; }
    nn::ParamStore<T>& params() { return params_; }
    const nn::ParamStore<T>& params() const { return params_; }

    Posterior<T> encode_graph(const ag::Var<T>& image) const;
    ag::Var<T> decode_graph(const ag::Var<T>& latent) const;

    /// sample == false returns the posterior mean; otherwise mean + std * xi.
    EncodeResult<T> encode(const Tensor<T>& image, bool sample, Rng* noise) const;
    Tensor<T> decode(const BasicLatentBatch<T>& latent) const;

    void check_image(const Tensor<T>& image) const;

private:
    ag::Var<T> conv(const std::string& name, const ag::Var<T>& x, int stride) const;
    ag::Var<T> res_block(const std::string& prefix, const ag::Var<T>& x) const;

    CodecConfig cfg_;
    nn::ParamStore<T> params_;
};

/// Pluggable perceptual term: f(recon, image) -> scalar.
template <typename T>
using PerceptualFn = std::function<ag::Var<T>(const ag::Var<T>&, const ag::Var<T>&)>;

/// Default perceptual term: L1 difference of horizontal and vertical image
/// gradients, averaged over the native and half resolution.
template <typename T>
ag::Var<T> gradient_l1_perceptual(const ag::Var<T>& recon, const ag::Var<T>& image);

template <typename T>
struct VaeLossTerms {
    ag::Var<T> rec;
    ag::Var<T> perceptual;  // undefined when gamma == 0
    ag::Var<T> kl;
    ag::Var<T> total;
};

struct LossBreakdown {
    double rec = 0.0;
    double perceptual = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

/// rec + gamma * perceptual + beta_kl * kl, with rec the per-element MSE.
template <typename T>
VaeLossTerms<T> vae_loss(const ag::Var<T>& image, const ag::Var<T>& recon,
                         const Posterior<T>& posterior, double gamma, double beta_kl,
                         const PerceptualFn<T>& perceptual = gradient_l1_perceptual<T>);

template <typename T>
LossBreakdown breakdown(const VaeLossTerms<T>& terms)
{
    LossBreakdown b;
    b.rec = terms.rec.value()[0];
    b.perceptual = terms.perceptual.defined() ? static_cast<double>(terms.perceptual.value()[0]) : 0.0;
    b.kl = terms.kl.value()[0];
    b.total = terms.total.value()[0];
    return b;
}

/// Reciprocal pooled standard deviation over a set of unscaled latents.
double estimate_scale(const std::vector<Tensor<float>>& latents, std::size_t min_latents = 256);

/// latent * s, flagged scaled. Throws on double application or unset s.
LatentBatch apply_scale(const LatentBatch& latent, const ModalityRegistry& reg);
/// latent / s, flagged unscaled.
LatentBatch remove_scale(const LatentBatch& latent, const ModalityRegistry& reg);

}  // namespace a2a
