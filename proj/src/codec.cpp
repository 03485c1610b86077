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

#include "a2a/codec.hpp"

#include <cmath>

namespace a2a {

CodecConfig make_codec_config(const ModalityRegistry& reg, ModalityId id, int latent_width,
                              int min_width)
{
    const auto& spec = reg.spec(id);
    CodecConfig cfg;
    cfg.modality = id;
    cfg.channels = spec.channels;
    cfg.native_size = spec.native_size;
    cfg.latent = reg.contract();
    const int depth = reg.downsampling_depth(id);
    cfg.widths.resize(static_cast<std::size_t>(depth) + 1);
    for (int l = 0; l <= depth; ++l) {
        cfg.widths[static_cast<std::size_t>(l)] = std::max(min_width, latent_width >> (depth - l));
    }
    return cfg;
}

void apply_reference_loss_weights(CodecConfig& cfg, const std::string& modality_name)
{
    cfg.gamma = modality_name == "RGB" ? 1.0 : 0.0;
    cfg.beta_kl = 1e-5;
}

template <typename T>
Codec<T>::Codec(CodecConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg))
{
    require(cfg_.depth() >= 0, "codec needs at least one width level");
    require((cfg_.native_size >> cfg_.depth()) == cfg_.latent.h &&
                cfg_.native_size == (cfg_.latent.h << cfg_.depth()),
            "codec depth inconsistent with native size and latent contract");
    require(cfg_.gamma >= 0.0 && cfg_.beta_kl >= 0.0, "codec loss weights must be non-negative");
    Rng rng(seed, 0xc0dec + static_cast<std::uint64_t>(cfg_.modality));
    auto add_conv = [&](const std::string& name, int in, int out, double gain = 1.0) {
        auto w = nn::xavier_uniform<T>(rng, {out, in * 9}, in * 9, out * 9);
        for (auto& v : w.data) v = static_cast<T>(v * gain);
        params_.add(name + ".w", std::move(w));
        params_.add(name + ".b", Tensor<T>({out}));
    };
    const int d = cfg_.depth();
    const auto& w = cfg_.widths;
    const int top = w[static_cast<std::size_t>(d)];
    add_conv("enc.conv_in", cfg_.channels, w[0]);
    for (int l = 0; l < d; ++l) {
        add_conv("enc.down" + std::to_string(l), w[static_cast<std::size_t>(l)],
                 w[static_cast<std::size_t>(l) + 1]);
    }
    add_conv("enc.res.conv1", top, top);
    add_conv("enc.res.conv2", top, top, 0.5);
    add_conv("enc.conv_out", top, 2 * cfg_.latent.c);

    add_conv("dec.conv_in", cfg_.latent.c, top);
    add_conv("dec.res.conv1", top, top);
    add_conv("dec.res.conv2", top, top, 0.5);
    for (int l = d - 1; l >= 0; --l) {
        add_conv("dec.up" + std::to_string(l), w[static_cast<std::size_t>(l) + 1],
                 w[static_cast<std::size_t>(l)]);
    }
    add_conv("dec.conv_out", w[0], cfg_.channels);
}

template <typename T>
ag::Var<T> Codec<T>::conv(const std::string& name, const ag::Var<T>& x, int stride) const
{
    return ag::conv2d(x, params_.get(name + ".w"), params_.get(name + ".b"), 3, stride, 1);
}

template <typename T>
ag::Var<T> Codec<T>::res_block(const std::string& prefix, const ag::Var<T>& x) const
{
    auto h = ag::silu(conv(prefix + ".conv1", x, 1));
    return ag::add(x, conv(prefix + ".conv2", h, 1));
}

template <typename T>
void Codec<T>::check_image(const Tensor<T>& image) const
{
    const bool ok = image.rank() == 4 && image.dim(1) == cfg_.channels &&
                    image.dim(2) == cfg_.native_size && image.dim(3) == cfg_.native_size;
    require(ok, "codec input: expected image (B, " + std::to_string(cfg_.channels) + ", " +
                    std::to_string(cfg_.native_size) + ", " + std::to_string(cfg_.native_size) +
                    "), got " + shape_str(image.shape));
}

template <typename T>
Posterior<T> Codec<T>::encode_graph(const ag::Var<T>& image) const
{
    check_image(image.value());
    auto h = ag::silu(conv("enc.conv_in", image, 1));
    for (int l = 0; l < cfg_.depth(); ++l) {
        h = ag::silu(conv("enc.down" + std::to_string(l), h, 2));
    }
    h = ag::silu(res_block("enc.res", h));
    auto out = conv("enc.conv_out", h, 1);
    const int c = cfg_.latent.c;
    Posterior<T> p;
    p.mean = ag::slice_channels(out, 0, c);
    p.logvar = ag::clamp(ag::slice_channels(out, c, 2 * c), static_cast<T>(kLogvarMin),
                         static_cast<T>(kLogvarMax));
    return p;
}

template <typename T>
ag::Var<T> Codec<T>::decode_graph(const ag::Var<T>& latent) const
{
    check_latent_shape(latent.value(), cfg_.latent, "codec decode");
    auto h = ag::silu(conv("dec.conv_in", latent, 1));
    h = ag::silu(res_block("dec.res", h));
    for (int l = cfg_.depth() - 1; l >= 0; --l) {
        h = ag::silu(conv("dec.up" + std::to_string(l), ag::upsample2x(h), 1));
    }
    return ag::tanh(conv("dec.conv_out", h, 1));
}

template <typename T>
EncodeResult<T> Codec<T>::encode(const Tensor<T>& image, bool sample, Rng* noise) const
{
    ag::NoGradGuard guard;
    auto post = encode_graph(ag::Var<T>::leaf(image));
    EncodeResult<T> r;
    r.mean = post.mean.value();
    r.logvar = post.logvar.value();
    r.latent.modality = cfg_.modality;
    r.latent.scaled = false;
    r.latent.data = r.mean;
    if (sample) {
        require(noise != nullptr, "codec encode: sampling needs a noise source");
        for (std::size_t i = 0; i < r.latent.data.numel(); ++i) {
            r.latent.data.data[i] = static_cast<T>(
                r.mean.data[i] + std::exp(0.5 * r.logvar.data[i]) * noise->normal());
        }
    }
    return r;
}

template <typename T>
Tensor<T> Codec<T>::decode(const BasicLatentBatch<T>& latent) const
{
    require(!latent.scaled, "codec decode: latent is still scaled; remove the scale first");
    require(latent.modality == cfg_.modality, "codec decode: latent belongs to another modality");
    ag::NoGradGuard guard;
    return decode_graph(ag::Var<T>::leaf(latent.data)).value();
}

template <typename T>
ag::Var<T> gradient_l1_perceptual(const ag::Var<T>& recon, const ag::Var<T>& image)
{
    auto term = [](const ag::Var<T>& r, const ag::Var<T>& x) {
        return ag::add(ag::mean_abs_diff(ag::diff_x(r), ag::diff_x(x)),
                       ag::mean_abs_diff(ag::diff_y(r), ag::diff_y(x)));
    };
    auto total = term(recon, image);
    const bool half = recon.value().dim(2) % 2 == 0 && recon.value().dim(2) >= 4 &&
                      recon.value().dim(3) % 2 == 0 && recon.value().dim(3) >= 4;
    if (!half) {
        return total;
    }
    total = ag::add(total, term(ag::avg_pool2x(recon), ag::avg_pool2x(image)));
    return ag::scale(total, T(0.5));
}

template <typename T>
VaeLossTerms<T> vae_loss(const ag::Var<T>& image, const ag::Var<T>& recon,
                         const Posterior<T>& posterior, double gamma, double beta_kl,
                         const PerceptualFn<T>& perceptual)
{
    require(image.shape() == recon.shape(), "vae_loss: image " + shape_str(image.shape()) +
                                                " vs reconstruction " + shape_str(recon.shape()));
    require(gamma >= 0.0 && beta_kl >= 0.0, "vae_loss: weights must be non-negative");
    VaeLossTerms<T> t;
    t.rec = ag::mse(recon, image);
    t.kl = ag::kl_std_normal(posterior.mean, posterior.logvar);
    t.total = ag::add(t.rec, ag::scale(t.kl, static_cast<T>(beta_kl)));
    if (gamma > 0.0) {
        t.perceptual = perceptual(recon, image);
        t.total = ag::add(t.total, ag::scale(t.perceptual, static_cast<T>(gamma)));
    }
    return t;
}

double estimate_scale(const std::vector<Tensor<float>>& latents, std::size_t min_latents)
{
    std::size_t items = 0;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : latents) {
        items += t.rank() == 4 ? static_cast<std::size_t>(t.dim(0)) : 1;
        for (float v : t.data) {
            sum += v;
            ++n;
        }
    }
    require(items >= min_latents, "estimate_scale: need at least " + std::to_string(min_latents) +
                                      " latents, got " + std::to_string(items));
    const double mu = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& t : latents) {
        for (float v : t.data) sq += (v - mu) * (v - mu);
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    require(sd > 1e-12 && std::isfinite(sd), "estimate_scale: latents have zero variance");
    return 1.0 / sd;
}

LatentBatch apply_scale(const LatentBatch& latent, const ModalityRegistry& reg)
{
    require(!latent.scaled, "apply_scale: latent is already scaled");
    const auto& spec = reg.spec(latent.modality);
    require(spec.scale_factor.has_value(), "apply_scale: scale factor for " + spec.name + " is unset");
    LatentBatch out = latent;
    const double s = *spec.scale_factor;
    for (auto& v : out.data.data) v = static_cast<float>(v * s);
    out.scaled = true;
    return out;
}

LatentBatch remove_scale(const LatentBatch& latent, const ModalityRegistry& reg)
{
    require(latent.scaled, "remove_scale: latent is not scaled");
    const auto& spec = reg.spec(latent.modality);
    require(spec.scale_factor.has_value(), "remove_scale: scale factor for " + spec.name + " is unset");
    LatentBatch out = latent;
    const double s = *spec.scale_factor;
    for (auto& v : out.data.data) v = static_cast<float>(v / s);
    out.scaled = false;
    return out;
}

template class Codec<float>;
template class Codec<double>;
template ag::Var<float> gradient_l1_perceptual(const ag::Var<float>&, const ag::Var<float>&);
template ag::Var<double> gradient_l1_perceptual(const ag::Var<double>&, const ag::Var<double>&);
template VaeLossTerms<float> vae_loss(const ag::Var<float>&, const ag::Var<float>&,
                                      const Posterior<float>&, double, double,
                                      const PerceptualFn<float>&);
template VaeLossTerms<double> vae_loss(const ag::Var<double>&, const ag::Var<double>&,
                                       const Posterior<double>&, double, double,
                                       const PerceptualFn<double>&);

}  // namespace a2a
