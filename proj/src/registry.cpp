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

#include "a2a/registry.hpp"

#include <cmath>

#include "a2a/error.hpp"

namespace a2a {

const char* to_string(DirectionStatus s)
{
    return s == DirectionStatus::kTrained ? "TRAINED" : "ZERO_SHOT";
}

ModalityRegistry::ModalityRegistry(LatentShape contract) : contract_(contract)
{
    require(contract.c >= 1 && contract.h >= 1 && contract.w >= 1,
            "latent contract dimensions must be positive");
}

ModalityId ModalityRegistry::register_modality(ModalitySpec spec)
{
    require(!frozen_, "registry is frozen; cannot register " + spec.name);
    require(!spec.name.empty(), "modality name must not be empty");
    require(spec.name.find_first_of(":=., \t\n") == std::string::npos,
            "modality name contains a reserved character: " + spec.name);
    require(!contains(spec.name), "duplicate modality name: " + spec.name);
    require(spec.channels >= 1, "modality " + spec.name + ": channels must be positive");
    require(spec.native_size >= 1, "modality " + spec.name + ": native size must be positive");
    require(spec.native_size >= contract_.h && spec.native_size % contract_.h == 0,
            "modality " + spec.name + ": native size must be a multiple of the latent size");
    const int ratio = spec.native_size / contract_.h;
    require((ratio & (ratio - 1)) == 0,
            "modality " + spec.name + ": native/latent size ratio must be a power of two");
    require(contract_.h == contract_.w, "latent contract must be square");
    if (spec.scale_factor) {
        require(*spec.scale_factor > 0, "modality " + spec.name + ": scale factor must be positive");
    }
    specs_.push_back(std::move(spec));
    return static_cast<ModalityId>(specs_.size() - 1);
}

bool ModalityRegistry::contains(const std::string& name) const
{
    for (const auto& s : specs_) {
        if (s.name == name) return true;
    }
    return false;
}

ModalityId ModalityRegistry::id_of(const std::string& name) const
{
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].name == name) return static_cast<ModalityId>(i);
    }
    fail("unknown modality: " + name);
}

const ModalitySpec& ModalityRegistry::spec(ModalityId id) const
{
    require(id >= 0 && id < size(), "modality id out of range: " + std::to_string(id));
    return specs_[static_cast<std::size_t>(id)];
}

int ModalityRegistry::downsampling_depth(ModalityId id) const
{
    int ratio = spec(id).native_size / contract_.h;
    int depth = 0;
    while (ratio > 1) {
        ratio /= 2;
        ++depth;
    }
    return depth;
}

void ModalityRegistry::set_scale_factor(ModalityId id, double s)
{
    require(s > 0 && std::isfinite(s), "scale factor must be positive and finite");
    spec(id);
    specs_[static_cast<std::size_t>(id)].scale_factor = s;
}

TranslationDirection ModalityRegistry::resolve_direction(const std::string& src,
                                                         const std::string& tgt,
                                                         const DirectionSet& trained) const
{
    TranslationDirection d;
    d.src = src;
    d.tgt = tgt;
    d.src_id = id_of(src);
    d.tgt_id = id_of(tgt);
    require(src != tgt, "direction source and target must differ: " + src);
    d.status = trained.contains({src, tgt}) ? DirectionStatus::kTrained : DirectionStatus::kZeroShot;
    return d;
}

std::vector<TranslationDirection> ModalityRegistry::list_directions(const DirectionSet& trained,
                                                                    DirectionFilter filter) const
{
    std::vector<TranslationDirection> out;
    for (const auto& s : specs_) {
        for (const auto& t : specs_) {
            if (s.name == t.name) continue;
            auto d = resolve_direction(s.name, t.name, trained);
            const bool keep = filter == DirectionFilter::kAll ||
                              (filter == DirectionFilter::kTrained && d.status == DirectionStatus::kTrained) ||
                              (filter == DirectionFilter::kZeroShot && d.status == DirectionStatus::kZeroShot);
            if (keep) out.push_back(std::move(d));
        }
    }
    return out;
}

ModalityRegistry default_registry(LatentShape contract, int base_size)
{
    ModalityRegistry reg(contract);
    reg.register_modality({"SAR", 1, base_size, std::nullopt});
    reg.register_modality({"RGB", 3, base_size, std::nullopt});
    reg.register_modality({"MS", 6, base_size / 2, std::nullopt});
    reg.register_modality({"NIR", 1, base_size, std::nullopt});
    reg.register_modality({"PAN", 1, base_size * 2, std::nullopt});
    return reg;
}

std::vector<std::pair<std::string, std::string>> seven_pair_protocol()
{
    return {{"SAR", "RGB"}, {"NIR", "RGB"}, {"NIR", "MS"}, {"MS", "RGB"},
            {"SAR", "MS"},  {"SAR", "NIR"}, {"PAN", "RGB"}};
}

DirectionSet protocol_directions(const std::vector<std::pair<std::string, std::string>>& pairs)
{
    DirectionSet out;
    for (const auto& [a, b] : pairs) {
        out.insert({a, b});
        out.insert({b, a});
    }
    return out;
}

std::vector<std::pair<std::string, double>> reference_scale_factors()
{
    return {{"SAR", 0.422003}, {"RGB", 0.387068}, {"MS", 0.484645}, {"NIR", 0.568811},
            {"PAN", 0.447582}};
}

std::pair<std::string, std::string> parse_direction(const std::string& text)
{
    const auto pos = text.find(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == text.size() ||
        text.find(':', pos + 1) != std::string::npos) {
        throw UsageError("direction must look like SRC:TGT, got '" + text + "'");
    }
    return {text.substr(0, pos), text.substr(pos + 1)};
}

}  // namespace a2a
