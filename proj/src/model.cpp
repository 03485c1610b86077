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

#include "a2a/model.hpp"

namespace a2a {

namespace {

// Distinct seed streams per component so adding one never perturbs another.
std::uint64_t component_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix64(seed ^ (tag * 0x9e3779b97f4a7c15ULL)); }

}  // namespace

Any2AnyModel Any2AnyModel::create(ModalityRegistry registry, const ModelConfig& cfg)
{
    if (!registry.frozen()) registry.freeze();
    Any2AnyModel m;
    m.config = cfg;
    m.config.backbone.latent = registry.contract();
    m.config.backbone.num_modalities = registry.size();
    m.registry = std::move(registry);
    m.schedule = build_schedule(cfg.schedule);
    for (int i = 0; i < m.registry.size(); ++i) {
        auto cc = make_codec_config(m.registry, i, cfg.codec_width, cfg.codec_min_width);
        if (cfg.reference_loss_weights) apply_reference_loss_weights(cc, m.registry.spec(i).name);
        m.codecs.emplace_back(cc, component_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i)));
    }
    m.reset_backbone(m.config.backbone);
    return m;
}

void Any2AnyModel::reset_backbone(const BackboneConfig& cfg)
{
    config.backbone = cfg;
    config.backbone.latent = registry.contract();
    config.backbone.num_modalities = registry.size();
    config.backbone.validate();
    backbone = Backbone<float>(config.backbone, component_seed(config.seed, 1));
    adapters = init_adapter_bank<float>(registry, component_seed(config.seed, 2));
}

long long Any2AnyModel::step_count(const std::string& key) const
{
    auto it = steps.find(key);
    return it == steps.end() ? 0 : it->second;
}

bool Any2AnyModel::scales_ready() const
{
    for (const auto& s : registry.specs()) {
        if (!s.scale_factor) return false;
    }
    return true;
}

std::map<std::string, std::size_t> parameter_counts(const Any2AnyModel& model)
{
    std::map<std::string, std::size_t> out;
    std::size_t total = 0;
    for (int i = 0; i < model.registry.size(); ++i) {
        const auto n = model.codecs[static_cast<std::size_t>(i)].params().scalar_count(true);
        out["codec." + model.registry.spec(i).name] = n;
        total += n;
    }
    out["backbone"] = model.backbone.params().scalar_count(true);
    out["adapters"] = model.adapters.params().scalar_count(true);
    total += out["backbone"] + out["adapters"];
    out["total"] = total;
    return out;
}

}  // namespace a2a
