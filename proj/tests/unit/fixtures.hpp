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

#include "a2a/model.hpp"
#include "a2a/synth.hpp"
#include "test_util.hpp"

namespace a2a::test {

/// Five default modalities shrunk to a (4, 4, 4) contract; PAN 16 px, MS 4 px.
inline ModalityRegistry tiny_registry() { return default_registry({4, 4, 4}, 8); }

inline ModelConfig tiny_model_config(std::uint64_t seed = 3)
{
    ModelConfig cfg;
    cfg.seed = seed;
    cfg.codec_width = 8;
    cfg.codec_min_width = 4;
    cfg.backbone.patch = 2;
    cfg.backbone.width = 16;
    cfg.backbone.depth = 1;
    cfg.backbone.heads = 2;
    cfg.backbone.mlp_ratio = 2;
    cfg.backbone.time_features = 8;
    return cfg;
}

/// Tiny model with unit scale factors, ready for Stage II.
inline Any2AnyModel tiny_model(std::uint64_t seed = 3)
{
    auto m = Any2AnyModel::create(tiny_registry(), tiny_model_config(seed));
    for (int i = 0; i < m.registry.size(); ++i) m.registry.set_scale_factor(i, 1.0);
    return m;
}

/// Writes and ingests a small paired dataset.
inline PairedDataset tiny_dataset(const TempDir& dir, const ModalityRegistry& reg, const std::string& protocol,
                                  std::uint64_t first = 0, std::uint64_t last = 7)
{
    make_paired_dataset(first, last, protocol, reg, dir.path());
    return PairedDataset::ingest(dir.path(), reg);
}

}  // namespace a2a::test
