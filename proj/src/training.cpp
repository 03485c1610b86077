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

#include "a2a/training.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "a2a/metrics.hpp"
#include "a2a/pipeline.hpp"

namespace a2a {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor<float> gather_batch(const Tensor<float>& images, const std::vector<std::size_t>& idx)
{
    Shape shape = images.shape;
    shape[0] = static_cast<int>(idx.size());
    Tensor<float> out(shape);
    const std::size_t item = images.numel() / static_cast<std::size_t>(images.dim(0));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * item), item,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * item));
    }
    return out;
}

Tensor<float> slice_batch(const Tensor<float>& images, int start, int count)
{
    std::vector<std::size_t> idx;
    for (int i = 0; i < count; ++i) idx.push_back(static_cast<std::size_t>(start + i));
    return gather_batch(images, idx);
}

}  // namespace

VaeTrainResult train_vae(Codec<float>& codec, const Tensor<float>& images, const VaeTrainConfig& cfg,
                         const std::function<void(const VaeStepReport&)>& on_step)
{
    require(cfg.steps >= 0, "train_vae: steps must be non-negative");
    require(cfg.batch >= 1, "train_vae: batch must be positive");
    codec.check_image(images);
    const auto n = static_cast<std::size_t>(images.dim(0));
    nn::Adam<float> opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm});
    Rng rng(cfg.seed, 0x57a9e1 + static_cast<std::uint64_t>(codec.config().modality));
    VaeTrainResult result;
    std::vector<std::size_t> order;
    std::size_t cursor = n;
    std::uint64_t epoch = 0;
    for (long long step = 0; step < cfg.steps; ++step) {
        const auto start = Clock::now();
        std::vector<std::size_t> idx;
        for (int i = 0; i < cfg.batch; ++i) {
            if (cursor >= n) {
                order = shuffled_indices(n, splitmix64(cfg.seed + epoch++));
                cursor = 0;
            }
            idx.push_back(order[cursor++]);
        }
        auto x = ag::Var<float>::leaf(gather_batch(images, idx));
        codec.params().zero_grad();
        auto post = codec.encode_graph(x);
        const auto eps = gaussian<float>(post.mean.shape(), rng);
        auto z = ag::add(post.mean, ag::mul(ag::exp(ag::scale(post.logvar, 0.5f)), ag::Var<float>::leaf(eps)));
        auto recon = codec.decode_graph(z);
        auto terms = vae_loss(x, recon, post, codec.config().gamma, codec.config().beta_kl);
        VaeStepReport rep;
        rep.step = step + 1;
        rep.loss = breakdown(terms);
        if (!std::isfinite(rep.loss.total)) {
            fail("train_vae: non-finite loss at step " + std::to_string(step + 1) + " (rec=" +
                 std::to_string(rep.loss.rec) + ", kl=" + std::to_string(rep.loss.kl) + ")");
        }
        ag::backward(terms.total);
        rep.grad_norm = opt.step(codec.params());
        rep.wall_ms = elapsed_ms(start);
        if (on_step) on_step(rep);
        result.reports.push_back(rep);
    }
    result.psnr = roundtrip_psnr(codec, images);
    return result;
}

double roundtrip_psnr(const Codec<float>& codec, const Tensor<float>& images, int batch)
{
    const int n = images.dim(0);
    double sum = 0.0;
    int count = 0;
    for (int s = 0; s < n; s += batch) {
        const int k = std::min(batch, n - s);
        const auto x = slice_batch(images, s, k);
        const auto recon = codec.decode(codec.encode(x, false, nullptr).latent);
        const auto xs = unstack(x);
        const auto rs = unstack(recon);
        for (int i = 0; i < k; ++i) {
            const double p = psnr(to_display_range(rs[static_cast<std::size_t>(i)]),
                                  to_display_range(xs[static_cast<std::size_t>(i)]));
            sum += std::isinf(p) ? 100.0 : p;
            ++count;
        }
    }
    return sum / count;
}

std::vector<Tensor<float>> encode_means(const Codec<float>& codec, const Tensor<float>& images, int batch)
{
    std::vector<Tensor<float>> out;
    const int n = images.dim(0);
    for (int s = 0; s < n; s += batch) {
        const int k = std::min(batch, n - s);
        for (auto& t : unstack(codec.encode(slice_batch(images, s, k), false, nullptr).latent.data)) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::string step_report_json(const StepReport& r)
{
    nlohmann::json j{{"step", r.step},         {"direction", r.direction}, {"L_z0", r.l_z0},
                     {"L_calib", r.l_calib},   {"L_total", r.l_total},     {"grad_norm", r.grad_norm},
                     {"wall_ms", r.wall_ms}};
    return j.dump();
}

int sample_timestep(Rng& rng, int T) { return static_cast<int>(rng.uniform_int(1, T)); }

template <typename T>
Stage2Loss<T> stage2_objective(const Backbone<T>& backbone, const AdapterBank<T>* adapters,
                               const NoiseSchedule& sched, const Tensor<T>& z_src, const Tensor<T>& z_tgt,
                               const std::vector<int>& t, const Tensor<T>& eps, ModalityId src, ModalityId tgt,
                               double lambda, bool literal_calibration)
{
    require(lambda >= 0.0, "stage2: lambda must be non-negative");
    require(z_src.shape == z_tgt.shape && z_src.shape == eps.shape, "stage2: latent shape mismatch");
    const int b = z_src.dim(0);
    require(static_cast<int>(t.size()) == b, "stage2: one timestep per example required");
    const std::size_t item = z_src.numel() / static_cast<std::size_t>(b);

    // z_t = sqrt(ab_t) z_tgt + sqrt(1 - ab_t) eps, per example.
    Tensor<T> zt(z_tgt.shape);
    for (int i = 0; i < b; ++i) {
        require(t[static_cast<std::size_t>(i)] >= 1, "stage2: timesteps must be >= 1");
        const double ab = sched.ab(t[static_cast<std::size_t>(i)]);
        const double a = std::sqrt(ab);
        const double s = std::sqrt(1.0 - ab);
        for (std::size_t k = 0; k < item; ++k) {
            const std::size_t j = static_cast<std::size_t>(i) * item + k;
            zt.data[j] = static_cast<T>(a * z_tgt.data[j] + s * eps.data[j]);
        }
    }
    auto input = ag::concat_channels(ag::Var<T>::leaf(std::move(zt)), ag::Var<T>::leaf(z_src));
    const std::vector<int> src_ids(static_cast<std::size_t>(b), src);
    const std::vector<int> tgt_ids(static_cast<std::size_t>(b), tgt);

    Stage2Loss<T> out;
    auto target = ag::Var<T>::leaf(z_tgt);
    out.z_hat = backbone.forward(input, t, src_ids, tgt_ids);
    out.l_z0 = ag::mse(out.z_hat, target);
    out.total = out.l_z0;
    if (adapters) {
        out.l_calib = adapters->calibration_loss(out.z_hat, target, tgt, literal_calibration);
        out.total = ag::add(out.l_z0, ag::scale(out.l_calib, static_cast<T>(lambda)));
    }
    return out;
}

template Stage2Loss<float> stage2_objective(const Backbone<float>&, const AdapterBank<float>*, const NoiseSchedule&,
                                            const Tensor<float>&, const Tensor<float>&, const std::vector<int>&,
                                            const Tensor<float>&, ModalityId, ModalityId, double, bool);
template Stage2Loss<double> stage2_objective(const Backbone<double>&, const AdapterBank<double>*,
                                             const NoiseSchedule&, const Tensor<double>&, const Tensor<double>&,
                                             const std::vector<int>&, const Tensor<double>&, ModalityId, ModalityId,
                                             double, bool);

LatentCache::LatentCache(const Any2AnyModel& model, const PairedDataset& data, const std::set<std::string>& modalities)
{
    add(model, data, modalities);
}

void LatentCache::add(const Any2AnyModel& model, const PairedDataset& data, const std::set<std::string>& modalities)
{
    for (const auto& m : modalities) {
        const auto keys = data.modality_images(m);
        if (keys.empty()) continue;
        const auto& codec = model.codec(m);
        const auto means = encode_means(codec, data.stack(keys));
        for (std::size_t i = 0; i < keys.size(); ++i) {
            LatentBatch lb;
            lb.modality = model.registry.id_of(m);
            lb.data = means[i];
            lb.data.shape.insert(lb.data.shape.begin(), 1);
            latents_[keys[i]] = apply_scale(lb, model.registry).data.data;
        }
    }
}

const float* LatentCache::latent(const std::string& key) const
{
    auto it = latents_.find(key);
    require(it != latents_.end(), "latent cache has no entry for " + key);
    return it->second.data();
}

Stage2Trainer::Stage2Trainer(Any2AnyModel& model, const PairedDataset& data, Stage2Config cfg)
    : model_(model),
      data_(data),
      cfg_(cfg),
      rng_(cfg.seed, 0x57a9e2),
      backbone_opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm}),
      adapter_opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm})
{
    require(cfg.lambda >= 0.0, "stage2: lambda must be non-negative");
    require(cfg.batch >= 1, "stage2: batch must be positive");
    require(model.scales_ready(), "stage2: every modality needs a scale factor (run compute-scales)");
    for (auto& c : model_.codecs) c.params().set_trainable(false);
    if (!model_.trained.empty()) extend_directions(model_.trained);
}

void Stage2Trainer::extend_directions(const DirectionSet& directions)
{
    std::set<std::string> need;
    for (const auto& [s, t] : directions) {
        model_.registry.resolve_direction(s, t, {});
        auto pairs = data_.direction_pairs(s, t);
        if (pairs.empty()) fail("no training pairs for direction " + s + ":" + t);
        pairs_[{s, t}] = std::move(pairs);
        if (!cached_.contains(s)) need.insert(s);
        if (!cached_.contains(t)) need.insert(t);
    }
    if (!need.empty()) {
        cache_.add(model_, data_, need);
        cached_.insert(need.begin(), need.end());
    }
    model_.trained.insert(directions.begin(), directions.end());
}

OptimizerState Stage2Trainer::optimizer_state()
{
    OptimizerState s;
    s.groups["backbone"] = &backbone_opt_;
    s.groups["adapters"] = &adapter_opt_;
    return s;
}

StepReport Stage2Trainer::step()
{
    require(!model_.trained.empty(), "stage2: the trained-direction set is empty");
    const auto& dirs = model_.trained;
    auto it = dirs.begin();
    std::advance(it, static_cast<long>(rng_.uniform_int(0, static_cast<long long>(dirs.size()) - 1)));
    const auto& [s, t] = *it;
    const auto dir = model_.registry.resolve_direction(s, t, dirs);
    const auto& pairs = pairs_.at({s, t});
    const auto& contract = model_.registry.contract();
    const std::size_t item = static_cast<std::size_t>(contract.numel());
    Tensor<float> zs({cfg_.batch, contract.c, contract.h, contract.w});
    Tensor<float> zt(zs.shape);
    for (int i = 0; i < cfg_.batch; ++i) {
        const auto& p = pairs[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<long long>(pairs.size()) - 1))];
        std::copy_n(cache_.latent(p.src), item, zs.data.begin() + static_cast<std::ptrdiff_t>(i * item));
        std::copy_n(cache_.latent(p.tgt), item, zt.data.begin() + static_cast<std::ptrdiff_t>(i * item));
    }
    return step_on(dir, zs, zt);
}

StepReport Stage2Trainer::step_on(const TranslationDirection& dir, const Tensor<float>& z_src,
                                  const Tensor<float>& z_tgt)
{
    const auto start = Clock::now();
    require(model_.trained.contains({dir.src, dir.tgt}), "stage2: direction " + dir.label() + " is not in the trained set");
    check_latent_shape(z_src, model_.registry.contract(), "stage2 source");
    check_latent_shape(z_tgt, model_.registry.contract(), "stage2 target");
    const int b = z_src.dim(0);
    std::vector<int> t(static_cast<std::size_t>(b));
    for (auto& v : t) v = sample_timestep(rng_, model_.schedule.T());
    const auto eps = gaussian<float>(z_tgt.shape, rng_);

    model_.backbone.params().zero_grad();
    model_.adapters.params().zero_grad();
    const auto loss = stage2_objective(model_.backbone, model_.adapters_enabled ? &model_.adapters : nullptr,
                                       model_.schedule, z_src, z_tgt, t, eps, model_.registry.id_of(dir.src),
                                       model_.registry.id_of(dir.tgt), cfg_.lambda, cfg_.literal_calibration);
    StepReport r;
    r.direction = dir.label();
    r.l_z0 = loss.l_z0.value()[0];
    r.l_calib = loss.l_calib.defined() ? static_cast<double>(loss.l_calib.value()[0]) : 0.0;
    r.l_total = loss.total.value()[0];
    if (!std::isfinite(r.l_total)) fail("stage2: non-finite loss on " + dir.label());
    ag::backward(loss.total);
    const double gb = backbone_opt_.step(model_.backbone.params());
    double ga = 0.0;
    if (model_.adapters_enabled) ga = adapter_opt_.step(model_.adapters.params());
    r.grad_norm = std::sqrt(gb * gb + ga * ga);
    r.step = ++model_.steps["stage2"];
    r.wall_ms = elapsed_ms(start);
    return r;
}

}  // namespace a2a
