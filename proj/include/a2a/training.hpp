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
#include <map>
#include <string>
#include <vector>

#include "a2a/checkpoint.hpp"
#include "a2a/model.hpp"
#include "a2a/synth.hpp"

namespace a2a {

// ---------------------------------------------------------------- Stage I

struct VaeTrainConfig {
    long long steps = 2000;
    int batch = 16;
    double lr = 1e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
};

struct VaeStepReport {
    long long step = 0;
    LossBreakdown loss;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

struct VaeTrainResult {
    std::vector<VaeStepReport> reports;
    /// Mean round-trip PSNR (posterior mean) over the training images.
    double psnr = 0.0;
};

/// Trains one codec on images (N, C, H, W). Throws on a non-finite loss.
VaeTrainResult train_vae(Codec<float>& codec, const Tensor<float>& images, const VaeTrainConfig& cfg,
                         const std::function<void(const VaeStepReport&)>& on_step = {});

/// Mean PSNR of decode(encode_mean(x)) against x over a batch.
double roundtrip_psnr(const Codec<float>& codec, const Tensor<float>& images, int batch = 64);

/// Unscaled posterior means for a batch of images, one (c, h, w) tensor each.
std::vector<Tensor<float>> encode_means(const Codec<float>& codec, const Tensor<float>& images, int batch = 64);

// ---------------------------------------------------------------- Stage II

struct Stage2Config {
    double lr = 1e-4;
    double clip_norm = 1.0;
    int batch = 16;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    /// Keep the leading z_hat of the calibration loss attached (ablation).
    bool literal_calibration = false;
};

struct StepReport {
    long long step = 0;
    std::string direction;
    double l_z0 = 0.0;
    double l_calib = 0.0;
    double l_total = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

std::string step_report_json(const StepReport& r);

/// Loss terms of one Stage-II step, for any scalar type.
template <typename T>
struct Stage2Loss {
    ag::Var<T> z_hat;
    ag::Var<T> l_z0;
    ag::Var<T> l_calib;  // undefined without adapters
    ag::Var<T> total;
};

/// L_z0 + lambda * L_calib for scaled latents z_src, z_tgt [B, c, h, w],
/// per-example timesteps t and noise eps. `adapters` may be null.
template <typename T>
Stage2Loss<T> stage2_objective(const Backbone<T>& backbone, const AdapterBank<T>* adapters,
                               const NoiseSchedule& sched, const Tensor<T>& z_src, const Tensor<T>& z_tgt,
                               const std::vector<int>& t, const Tensor<T>& eps, ModalityId src, ModalityId tgt,
                               double lambda, bool literal_calibration = false);

/// Scaled posterior-mean latents of every dataset image, computed once with
/// the frozen codecs.
class LatentCache {
public:
    LatentCache() = default;
    LatentCache(const Any2AnyModel& model, const PairedDataset& data, const std::set<std::string>& modalities);

    void add(const Any2AnyModel& model, const PairedDataset& data, const std::set<std::string>& modalities);
    const float* latent(const std::string& key) const;
    std::size_t size() const { return latents_.size(); }

private:
    std::map<std::string, std::vector<float>> latents_;
};

/// Shared-backbone training over a set of directions. Each step draws one
/// direction uniformly from the trained set and a batch of its pairs.
class Stage2Trainer {
public:
    Stage2Trainer(Any2AnyModel& model, const PairedDataset& data, Stage2Config cfg);

    /// Adds directions to the trained set (set union) and caches any latents
    /// they need. Throws for unknown modalities or directions without pairs.
    void extend_directions(const DirectionSet& directions);

    /// One optimization step on a uniformly drawn direction.
    StepReport step();

    /// One optimization step on explicit scaled latents.
    StepReport step_on(const TranslationDirection& dir, const Tensor<float>& z_src, const Tensor<float>& z_tgt);

    Any2AnyModel& model() { return model_; }
    OptimizerState optimizer_state();
    nn::Adam<float>& backbone_optimizer() { return backbone_opt_; }
    nn::Adam<float>& adapter_optimizer() { return adapter_opt_; }
    const Stage2Config& config() const { return cfg_; }

private:
    Any2AnyModel& model_;
    const PairedDataset& data_;
    Stage2Config cfg_;
    Rng rng_;
    nn::Adam<float> backbone_opt_;
    nn::Adam<float> adapter_opt_;
    LatentCache cache_;
    std::set<std::string> cached_;
    std::map<std::pair<std::string, std::string>, std::vector<ImagePair>> pairs_;
};

/// Timestep drawn uniformly from {1..T}.
int sample_timestep(Rng& rng, int T);

}  // namespace a2a
