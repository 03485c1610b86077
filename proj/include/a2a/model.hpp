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
#include <map>
#include <string>
#include <vector>

#include "a2a/backbone.hpp"
#include "a2a/calibration.hpp"
#include "a2a/codec.hpp"
#include "a2a/diffusion.hpp"
#include "a2a/registry.hpp"

namespace a2a {

struct ModelConfig {
    ScheduleParams schedule;
    BackboneConfig backbone;
    /// Codec channel width at the latent level and the minimum width.
    int codec_width = 32;
    int codec_min_width = 8;
    /// Use the reference loss-weight preset (gamma 1 for RGB) for codecs.
    bool reference_loss_weights = false;
    std::uint64_t seed = 0;
};

/// Everything a checkpoint holds: registry, schedule, one codec per modality,
/// the shared backbone, the adapter bank and the trained-direction set.
class Any2AnyModel {
public:
    /// Fresh model. The registry is frozen if it is not already.
    static Any2AnyModel create(ModalityRegistry registry, const ModelConfig& cfg);

    ModalityRegistry registry;
    NoiseSchedule schedule;
    ModelConfig config;
    std::vector<Codec<float>> codecs;  // indexed by modality id
    Backbone<float> backbone;
    AdapterBank<float> adapters;
    DirectionSet trained;
    bool adapters_enabled = true;
    /// Completed optimizer steps: "vae.<NAME>" per codec and "stage2".
    std::map<std::string, long long> steps;
    /// Free-form command configuration echoed into the manifest.
    std::map<std::string, std::string> config_echo;

    Codec<float>& codec(const std::string& name) { return codecs.at(static_cast<std::size_t>(registry.id_of(name))); }
    const Codec<float>& codec(const std::string& name) const
    {
        return codecs.at(static_cast<std::size_t>(registry.id_of(name)));
    }
    long long step_count(const std::string& key) const;

    /// Re-initializes the backbone (and adapters) with a new architecture.
    void reset_backbone(const BackboneConfig& cfg);

    bool scales_ready() const;
};

/// Trainable-parameter counts per component ("codec.SAR", ..., "backbone",
/// "adapters", "total").
std::map<std::string, std::size_t> parameter_counts(const Any2AnyModel& model);

}  // namespace a2a
