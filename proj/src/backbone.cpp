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

#include "a2a/backbone.hpp"

#include <cmath>

namespace a2a {

void BackboneConfig::validate() const
{
    require(patch >= 1 && latent.h % patch == 0 && latent.w % patch == 0,
            "backbone: latent size must be divisible by the patch size");
    require(width >= 4 && width % 4 == 0, "backbone: width must be a positive multiple of 4");
    require(heads >= 1 && width % heads == 0, "backbone: width must be divisible by heads");
    require(depth >= 0 && mlp_ratio >= 1, "backbone: invalid depth or mlp ratio");
    require(time_features >= 2 && time_features % 2 == 0, "backbone: time features must be even");
    require(num_modalities >= 1, "backbone: need at least one modality");
}

std::size_t backbone_param_count(const BackboneConfig& cfg)
{
    const std::size_t d = static_cast<std::size_t>(cfg.width);
    const std::size_t f = static_cast<std::size_t>(cfg.time_features);
    const std::size_t hid = d * static_cast<std::size_t>(cfg.mlp_ratio);
    const std::size_t pin = static_cast<std::size_t>(cfg.patch_dim_in());
    const std::size_t pout = static_cast<std::size_t>(cfg.patch_dim_out());
    std::size_t n = pin * d + d;                                  // patch embedding
    n += f * d + d + d * d + d;                                   // timestep map
    if (cfg.embedding == EmbeddingMode::kLearned) {
        n += 2 * static_cast<std::size_t>(cfg.num_modalities) * d;  // src / tgt tables
    }
    n += 2 * (d * d + d);                                         // conditioning MLP
    const std::size_t block = (d * 6 * d + 6 * d)                 // adaLN projection
                              + (d * 3 * d + 3 * d)               // qkv
                              + (d * d + d)                       // attention output
                              + (d * hid + hid) + (hid * d + d);  // feed-forward
    n += static_cast<std::size_t>(cfg.depth) * block;
    n += (d * 2 * d + 2 * d) + (d * pout + pout);                 // final layer
    return n;
}

Tensor<float> construct_input(const LatentBatch& z_t, const LatentBatch& z_src)
{
    require(z_t.scaled && z_src.scaled, "construct_input: both latents must be scaled");
    require(z_t.data.shape == z_src.data.shape,
            "construct_input: shape mismatch " + shape_str(z_t.data.shape) + " vs " +
                shape_str(z_src.data.shape));
    require(z_t.data.rank() == 4, "construct_input: expects (B, c, h, w) latents");
    const int b = z_t.data.dim(0);
    const int c = z_t.data.dim(1);
    const std::size_t item = z_t.data.numel() / static_cast<std::size_t>(b);
    Tensor<float> out({b, 2 * c, z_t.data.dim(2), z_t.data.dim(3)});
    for (int i = 0; i < b; ++i) {
        std::copy_n(z_t.data.ptr() + i * item, item, out.ptr() + 2 * i * item);
        std::copy_n(z_src.data.ptr() + i * item, item, out.ptr() + (2 * i + 1) * item);
    }
    return out;
}

template <typename T>
Tensor<T> sincos_2d(int grid_h, int grid_w, int width)
{
    require(width % 4 == 0, "sincos_2d: width must be a multiple of 4");
    const int quarter = width / 4;
    Tensor<T> out({grid_h * grid_w, width});
    for (int y = 0; y < grid_h; ++y) {
        for (int x = 0; x < grid_w; ++x) {
            T* row = out.ptr() + static_cast<std::size_t>(y * grid_w + x) * width;
            for (int i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
                row[i] = static_cast<T>(std::sin(y * omega));
                row[quarter + i] = static_cast<T>(std::cos(y * omega));
                row[2 * quarter + i] = static_cast<T>(std::sin(x * omega));
                row[3 * quarter + i] = static_cast<T>(std::cos(x * omega));
            }
        }
    }
    return out;
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig cfg, std::uint64_t seed) : cfg_(cfg)
{
    cfg_.validate();
    Rng rng(seed, 0xd17);
    const int d = cfg_.width;
    const int hid = d * cfg_.mlp_ratio;
    auto dense = [&](const std::string& name, int in, int out) {
        params_.add(name + ".w", nn::xavier_uniform<T>(rng, {in, out}, in, out));
        params_.add(name + ".b", Tensor<T>({out}));
    };
    auto zero_dense = [&](const std::string& name, int in, int out) {
        params_.add(name + ".w", Tensor<T>({in, out}));
        params_.add(name + ".b", Tensor<T>({out}));
    };
    dense("patch", cfg_.patch_dim_in(), d);
    dense("t_embed.fc1", cfg_.time_features, d);
    dense("t_embed.fc2", d, d);
    const bool learned = cfg_.embedding == EmbeddingMode::kLearned;
    params_.add("src_table", nn::normal_init<T>(rng, {cfg_.num_modalities, d}, 0.5), learned);
    params_.add("tgt_table", nn::normal_init<T>(rng, {cfg_.num_modalities, d}, 0.5), learned);
    dense("cond.fc1", d, d);
    dense("cond.fc2", d, d);
    for (int i = 0; i < cfg_.depth; ++i) {
        const std::string p = "blocks." + std::to_string(i);
        zero_dense(p + ".ada", d, 6 * d);
        dense(p + ".qkv", d, 3 * d);
        dense(p + ".proj", d, d);
        dense(p + ".fc1", d, hid);
        dense(p + ".fc2", hid, d);
    }
    zero_dense("final.ada", d, 2 * d);
    zero_dense("final.head", d, cfg_.patch_dim_out());
    pos_ = ag::Var<T>::leaf(
        sincos_2d<T>(cfg_.latent.h / cfg_.patch, cfg_.latent.w / cfg_.patch, d), false);
}

template <typename T>
ag::Var<T> Backbone<T>::lin(const std::string& name, const ag::Var<T>& x) const
{
    return ag::linear(x, params_.get(name + ".w"), params_.get(name + ".b"));
}

template <typename T>
Tensor<T> Backbone<T>::timestep_features(const std::vector<int>& t) const
{
    const int half = cfg_.time_features / 2;
    Tensor<T> out({static_cast<int>(t.size()), cfg_.time_features});
    for (std::size_t b = 0; b < t.size(); ++b) {
        require(t[b] >= 0, "timestep must be non-negative");
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            const double arg = t[b] * freq;
            out.data[b * cfg_.time_features + i] = static_cast<T>(std::cos(arg));
            out.data[b * cfg_.time_features + half + i] = static_cast<T>(std::sin(arg));
        }
    }
    return out;
}

template <typename T>
ag::Var<T> Backbone<T>::build_conditioning(const std::vector<int>& t, const std::vector<int>& src,
                                           const std::vector<int>& tgt) const
{
    require(t.size() == src.size() && t.size() == tgt.size() && !t.empty(),
            "build_conditioning: t, src and tgt must have the same non-zero length");
    const int b = static_cast<int>(t.size());
    const int d = cfg_.width;
    auto src_rows = std::make_shared<std::vector<int>>(static_cast<std::size_t>(b) * d);
    auto tgt_rows = std::make_shared<std::vector<int>>(static_cast<std::size_t>(b) * d);
    for (int i = 0; i < b; ++i) {
        require(src[i] >= 0 && src[i] < cfg_.num_modalities && tgt[i] >= 0 &&
                    tgt[i] < cfg_.num_modalities,
                "build_conditioning: modality id out of range");
        for (int j = 0; j < d; ++j) {
            (*src_rows)[i * d + j] = src[i] * d + j;
            (*tgt_rows)[i * d + j] = tgt[i] * d + j;
        }
    }
    auto feats = ag::Var<T>::leaf(timestep_features(t));
    auto e_t = lin("t_embed.fc2", ag::silu(lin("t_embed.fc1", feats)));
    auto e_src = ag::gather(params_.get("src_table"), src_rows, {b, d});
    auto e_tgt = ag::gather(params_.get("tgt_table"), tgt_rows, {b, d});
    auto fused = ag::add(ag::add(e_t, e_src), e_tgt);
    return lin("cond.fc2", ag::silu(lin("cond.fc1", fused)));
}

template <typename T>
ag::Var<T> Backbone<T>::block(int index, const ag::Var<T>& x, const ag::Var<T>& c) const
{
    const int d = cfg_.width;
    require(c.value().rank() == 2 && c.value().dim(1) == d, "adaLN: conditioning width mismatch");
    const std::string p = "blocks." + std::to_string(index);
    auto mod = lin(p + ".ada", ag::silu(c));
    auto shift1 = ag::slice_last(mod, 0, d);
    auto scale1 = ag::slice_last(mod, d, d);
    auto gate1 = ag::slice_last(mod, 2 * d, d);
    auto shift2 = ag::slice_last(mod, 3 * d, d);
    auto scale2 = ag::slice_last(mod, 4 * d, d);
    auto gate2 = ag::slice_last(mod, 5 * d, d);

    auto h = ag::modulate(ag::layer_norm(x, T(1e-6)), shift1, scale1);
    auto attn = lin(p + ".proj", ag::attention(lin(p + ".qkv", h), cfg_.heads));
    auto out = ag::gated_add(x, gate1, attn);
    h = ag::modulate(ag::layer_norm(out, T(1e-6)), shift2, scale2);
    auto ff = lin(p + ".fc2", ag::gelu(lin(p + ".fc1", h)));
    return ag::gated_add(out, gate2, ff);
}

template <typename T>
ag::Var<T> Backbone<T>::predict_x0(const ag::Var<T>& input, const ag::Var<T>& c) const
{
    const auto& in = input.value();
    const int pch = cfg_.patch;
    require(in.rank() == 4 && in.dim(1) == cfg_.in_channels() && in.dim(2) == cfg_.latent.h &&
                in.dim(3) == cfg_.latent.w,
            "predict_x0: expected input (B, " + std::to_string(cfg_.in_channels()) + ", " +
                std::to_string(cfg_.latent.h) + ", " + std::to_string(cfg_.latent.w) + "), got " +
                shape_str(in.shape));
    const int b = in.dim(0);
    require(c.value().rank() == 2 && c.value().dim(0) == b, "predict_x0: conditioning batch mismatch");
    const int h = cfg_.latent.h;
    const int w = cfg_.latent.w;
    const int gw = w / pch;
    const int ntok = cfg_.tokens();

    // Patch feature order is (channel, row-in-patch, col-in-patch).
    auto patch_index = [&](int channels) {
        const int f = channels * pch * pch;
        auto idx = std::make_shared<std::vector<int>>(static_cast<std::size_t>(b) * ntok * f);
        for (int i = 0; i < b; ++i) {
            for (int tok = 0; tok < ntok; ++tok) {
                const int ty = tok / gw;
                const int tx = tok % gw;
                for (int ch = 0; ch < channels; ++ch) {
                    for (int py = 0; py < pch; ++py) {
                        for (int px = 0; px < pch; ++px) {
                            const int feat = (ch * pch + py) * pch + px;
                            const int pix = (((i * channels + ch) * h) + ty * pch + py) * w + tx * pch + px;
                            (*idx)[(static_cast<std::size_t>(i) * ntok + tok) * f + feat] = pix;
                        }
                    }
                }
            }
        }
        return idx;
    };

    auto tokens = ag::gather(input, patch_index(cfg_.in_channels()), {b, ntok, cfg_.patch_dim_in()});
    auto x = ag::add_broadcast(lin("patch", tokens), pos_);
    for (int i = 0; i < cfg_.depth; ++i) {
        x = block(i, x, c);
    }
    const int d = cfg_.width;
    auto mod = lin("final.ada", ag::silu(c));
    x = ag::modulate(ag::layer_norm(x, T(1e-6)), ag::slice_last(mod, 0, d), ag::slice_last(mod, d, d));
    auto out_tokens = lin("final.head", x);  // [B, N, c p p]

    // Inverse of the patch gather: every latent element reads one token slot.
    const int c_out = cfg_.latent.c;
    auto fwd = patch_index(c_out);
    auto inv = std::make_shared<std::vector<int>>(fwd->size());
    for (std::size_t k = 0; k < fwd->size(); ++k) {
        (*inv)[static_cast<std::size_t>((*fwd)[k])] = static_cast<int>(k);
    }
    auto out = ag::gather(out_tokens, inv, {b, c_out, h, w});
    for (T v : out.value().data) {
        if (!std::isfinite(v)) fail("predict_x0: non-finite activations (training diverged)");
    }
    return out;
}

template <typename T>
ag::Var<T> Backbone<T>::forward(const ag::Var<T>& input, const std::vector<int>& t,
                                const std::vector<int>& src, const std::vector<int>& tgt) const
{
    return predict_x0(input, build_conditioning(t, src, tgt));
}

template class Backbone<float>;
template class Backbone<double>;
template Tensor<float> sincos_2d<float>(int, int, int);
template Tensor<double> sincos_2d<double>(int, int, int);

}  // namespace a2a
